//! Collision kernels, their cut-off approximations and angular quadrature.
//!
//! The singular families are `b(cos theta) = (1 - cos theta)^(-5/4)` on the
//! sphere (Maxwellian molecules, grazing-collision singularity at theta = 0)
//! and `b(theta) = |cos theta| / |sin theta|^gamma` on `[-pi/2, pi/2]` for
//! the Kac equation, `gamma` strictly between 1 and 3. Neither is integrable,
//! so collision integrals are built from the bounded truncations
//! `bbar_l = min(b, l)` normalized by their total mass `bstar_l`.
//!
//! Quadrature nodes are placed on panels split exactly at the crossover
//! angle where `b = l` (the integrand has a kink there) and graded
//! geometrically away from it toward the smooth side, so a few hundred
//! nodes integrate `bbar_l` to machine precision even for large `l`.

use crate::error::{Error, Result};
use crate::numerics::gl_on_panels;
use crate::spectral::Mode;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative tolerance for the internal refinement check on `bstar`.
const BSTAR_REL_TOL: f64 = 1e-10;

/// Kernel family. `KacConstant` is the original Kac kernel (constant in the
/// angle); it is bounded, so cutting off at `l >= value` leaves it unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// `scale * |cos theta| / |sin theta|^gamma` on `[-pi/2, pi/2]`, `gamma` in `(1, 3)`.
    KacPower { gamma: f64, scale: f64 },
    /// `(1 - cos theta)^(-5/4)` on the sphere.
    MaxwellSingular,
    /// `b(theta) = value` on `[-pi/2, pi/2]`.
    KacConstant { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
}

impl KernelSpec {
    pub fn kac_power(gamma: f64) -> Result<Self> {
        Self::kac_power_scaled(gamma, 1.0)
    }

    /// Kac kernel with an explicit amplitude in front of the singular factor.
    pub fn kac_power_scaled(gamma: f64, scale: f64) -> Result<Self> {
        if !(gamma > 1.0 && gamma < 3.0) {
            return Err(Error::Config(format!(
                "Kac exponent gamma must lie strictly inside (1, 3), got {gamma}"
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::Config(format!(
                "kernel scale must be positive, got {scale}"
            )));
        }
        Ok(Self {
            family: KernelFamily::KacPower { gamma, scale },
        })
    }

    pub fn maxwell_singular() -> Self {
        Self {
            family: KernelFamily::MaxwellSingular,
        }
    }

    pub fn kac_constant(value: f64) -> Result<Self> {
        if !(value > 0.0) {
            return Err(Error::Config(format!(
                "constant kernel value must be positive, got {value}"
            )));
        }
        Ok(Self {
            family: KernelFamily::KacConstant { value },
        })
    }

    /// Simulation mode this kernel belongs to.
    pub fn mode(&self) -> Mode {
        match self.family {
            KernelFamily::MaxwellSingular => Mode::BoltzmannRadial3d,
            _ => Mode::Kac1d,
        }
    }

    /// Kernel value at the given angle.
    ///
    /// Kac families take `theta` in `[-pi/2, pi/2]`; the Maxwell family takes
    /// the spherical deviation angle `theta` in `(0, pi)` and evaluates
    /// `(1 - cos theta)^(-5/4)`. The singular point (`theta = 0`, where the
    /// value diverges) is a domain error.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        match self.family {
            KernelFamily::KacPower { gamma, scale } => {
                if !(-PI / 2.0..=PI / 2.0).contains(&theta) {
                    return Err(Error::Domain(format!(
                        "Kac kernel angle must lie in [-pi/2, pi/2], got {theta}"
                    )));
                }
                if theta == 0.0 {
                    return Err(Error::Domain(
                        "Kac kernel is singular at theta = 0".into(),
                    ));
                }
                Ok(scale * theta.cos().abs() / theta.sin().abs().powf(gamma))
            }
            KernelFamily::MaxwellSingular => {
                if !(0.0..=PI).contains(&theta) {
                    return Err(Error::Domain(format!(
                        "Maxwell kernel angle must lie in (0, pi), got {theta}"
                    )));
                }
                if theta == 0.0 {
                    return Err(Error::Domain(
                        "Maxwell kernel is singular at cos theta = 1".into(),
                    ));
                }
                Ok((1.0 - theta.cos()).powf(-1.25))
            }
            KernelFamily::KacConstant { value } => {
                if !(-PI / 2.0..=PI / 2.0).contains(&theta) {
                    return Err(Error::Domain(format!(
                        "Kac kernel angle must lie in [-pi/2, pi/2], got {theta}"
                    )));
                }
                Ok(value)
            }
        }
    }

    /// Upper end of the reduced angular domain used for quadrature:
    /// `pi/2` for Kac (after folding by evenness), `pi` for the sphere.
    fn theta_max(&self) -> f64 {
        match self.mode() {
            Mode::Kac1d => PI / 2.0,
            Mode::BoltzmannRadial3d => PI,
        }
    }

    /// Angle where `b = l`, or `None` when `b <= l` on the whole domain.
    /// Every family is strictly decreasing in `theta` on the reduced domain,
    /// so bisection applies.
    fn crossover(&self, l: f64) -> Option<f64> {
        let hi_val = match self.family {
            KernelFamily::KacPower { .. } => 0.0,
            KernelFamily::MaxwellSingular => 2f64.powf(-1.25),
            KernelFamily::KacConstant { value } => {
                return if value > l { Some(self.theta_max()) } else { None }
            }
        };
        if l <= hi_val {
            return None;
        }
        let (mut lo, mut hi) = (f64::MIN_POSITIVE, self.theta_max());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid).unwrap_or(f64::INFINITY) > l {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

/// A cut-off kernel `beta_l = min(b, l) / bstar_l` together with the
/// quadrature rule over its angular domain.
///
/// `nodes[i]` / `weights[i]` represent the full collision measure (the
/// evenness fold for Kac, the `2 pi sin theta` factor for the sphere), so
/// `sum_i weights[i] * beta[i] = 1` and a collision integral at radius `r`
/// is `sum_i weights[i] * beta[i] * phi(r * split_cos[i]) * phi(r * split_sin[i])`.
#[derive(Debug, Clone)]
pub struct CutoffKernel {
    pub spec: KernelSpec,
    pub level: f64,
    pub bstar: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `beta_l` at the nodes.
    pub beta: Vec<f64>,
    /// Cosine factor of the frequency splitting at each node
    /// (`cos theta` for Kac, `cos(theta/2)` for the sphere).
    pub split_cos: Vec<f64>,
    /// Sine factor of the splitting.
    pub split_sin: Vec<f64>,
}

impl CutoffKernel {
    /// Builds the cut-off kernel at level `l` with roughly `n_nodes`
    /// quadrature nodes.
    pub fn build(spec: KernelSpec, l: f64, n_nodes: usize) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::Config(format!(
                "cut-off level must be positive, got {l}"
            )));
        }
        if n_nodes < 2 {
            return Err(Error::Config(format!(
                "quadrature needs at least 2 nodes, got {n_nodes}"
            )));
        }
        let order = 8.min(n_nodes);
        let n_panels = (n_nodes / order).max(4);
        let built = Self::build_with_panels(spec, l, n_panels, order)?;
        // refinement check: doubled panel count must reproduce bstar
        let refined = Self::build_with_panels(spec, l, 2 * n_panels, order)?;
        let rel = (built.bstar / refined.bstar - 1.0).abs();
        if rel > BSTAR_REL_TOL {
            return Err(Error::Resolution(format!(
                "quadrature normalization residual {rel:.3e} above tolerance {BSTAR_REL_TOL:.0e}; \
                 increase n_nodes (currently {n_nodes})"
            )));
        }
        Ok(built)
    }

    fn build_with_panels(spec: KernelSpec, l: f64, n_panels: usize, order: usize) -> Result<Self> {
        let theta_max = spec.theta_max();
        let breaks = match spec.crossover(l) {
            Some(tc) if tc < theta_max => graded_breaks(tc, theta_max, n_panels),
            _ => uniform_breaks(theta_max, n_panels),
        };
        let (theta, mut weights) = gl_on_panels(&breaks, order);
        match spec.mode() {
            // fold [-pi/2, pi/2] onto [0, pi/2] by evenness of the integrand
            Mode::Kac1d => {
                for w in &mut weights {
                    *w *= 2.0;
                }
            }
            // azimuthal symmetry: dn = 2 pi sin theta dtheta
            Mode::BoltzmannRadial3d => {
                for (w, t) in weights.iter_mut().zip(&theta) {
                    *w *= 2.0 * PI * t.sin();
                }
            }
        }
        let bbar: Vec<f64> = theta
            .iter()
            .map(|&t| spec.eval(t).map(|v| v.min(l)))
            .collect::<Result<_>>()?;
        let bstar: f64 = weights.iter().zip(&bbar).map(|(w, b)| w * b).sum();
        if !(bstar > 0.0) {
            return Err(Error::Derivation(format!(
                "bstar must be positive, got {bstar}"
            )));
        }
        let beta: Vec<f64> = bbar.iter().map(|b| b / bstar).collect();
        let (split_cos, split_sin): (Vec<f64>, Vec<f64>) = match spec.mode() {
            Mode::Kac1d => theta.iter().map(|t| (t.cos(), t.sin())).unzip(),
            Mode::BoltzmannRadial3d => theta
                .iter()
                .map(|t| ((0.5 * t).cos(), (0.5 * t).sin()))
                .unzip(),
        };
        Ok(Self {
            spec,
            level: l,
            bstar,
            nodes: theta,
            weights,
            beta,
            split_cos,
            split_sin,
        })
    }

    /// `sum_i weights[i] * beta[i]`; equals 1 up to rounding by construction.
    pub fn normalization(&self) -> f64 {
        self.weights.iter().zip(&self.beta).map(|(w, b)| w * b).sum()
    }

    pub fn mode(&self) -> Mode {
        self.spec.mode()
    }
}

/// Panels split at the crossover angle: uniform on the plateau `[0, tc]`
/// (where `bbar = l` is constant) and geometrically graded on `[tc, tmax]`,
/// clustered at `tc` where the kernel still varies fastest.
fn graded_breaks(tc: f64, tmax: f64, n_panels: usize) -> Vec<f64> {
    let n_flat = (n_panels / 2).max(2);
    let n_graded = (n_panels - n_flat).max(2);
    let mut breaks: Vec<f64> = (0..=n_flat)
        .map(|i| tc * i as f64 / n_flat as f64)
        .collect();
    let ratio = (tmax / tc).powf(1.0 / n_graded as f64);
    for i in 1..=n_graded {
        breaks.push(tc * ratio.powi(i as i32));
    }
    let last = breaks.len() - 1;
    breaks[last] = tmax;
    breaks
}

fn uniform_breaks(tmax: f64, n_panels: usize) -> Vec<f64> {
    (0..=n_panels)
        .map(|i| tmax * i as f64 / n_panels as f64)
        .collect()
}

/// Closed-form `bstar` for the Maxwell family (valid for `l >= 2^(-5/4)`):
/// `2 pi (5 l^(1/5) - 4 * 2^(-1/4))`. Exposed for oracle use in tests and
/// the kernel-table workflow.
pub fn bstar_maxwell_exact(l: f64) -> f64 {
    2.0 * PI * (5.0 * l.powf(0.2) - 4.0 * 2f64.powf(-0.25))
}

/// Closed-form `bstar` for the Kac power family: with `tc` the crossover,
/// `2 [ l tc + (1 - sin(tc)^(1-gamma)) / (1 - gamma) ]`.
pub fn bstar_kac_exact(gamma: f64, l: f64) -> f64 {
    let spec = KernelSpec::kac_power(gamma).expect("gamma in (1,3)");
    let tc = spec.crossover(l).expect("singular kernel always crosses l");
    2.0 * (l * tc + (1.0 - tc.sin().powf(1.0 - gamma)) / (1.0 - gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_maxwell_at_cos_zero_is_one() {
        let spec = KernelSpec::maxwell_singular();
        assert!((spec.eval(PI / 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_kac_at_half_pi_is_zero() {
        let spec = KernelSpec::kac_power(2.0).unwrap();
        assert!(spec.eval(PI / 2.0).unwrap().abs() < 1e-16);
    }

    #[test]
    fn eval_maxwell_hand_value() {
        // (1 - cos theta) = 1/16  =>  16^(5/4) = 32
        let spec = KernelSpec::maxwell_singular();
        let theta = (1.0 - 1.0 / 16.0f64).acos();
        assert!((spec.eval(theta).unwrap() - 32.0).abs() < 1e-12);
    }

    #[test]
    fn eval_singular_points_error() {
        assert!(KernelSpec::maxwell_singular().eval(0.0).is_err());
        assert!(KernelSpec::kac_power(2.0).unwrap().eval(0.0).is_err());
        assert!(KernelSpec::maxwell_singular().eval(4.0).is_err());
    }

    #[test]
    fn gamma_outside_open_interval_rejected() {
        assert!(KernelSpec::kac_power(1.0).is_err());
        assert!(KernelSpec::kac_power(3.0).is_err());
        assert!(KernelSpec::kac_power(2.999).is_ok());
    }

    #[test]
    fn constant_kernel_uniform_beta_and_measure_mass() {
        // b = c with l >= c: beta uniform, bstar = c * |domain| = c * pi
        let spec = KernelSpec::kac_constant(0.7).unwrap();
        let k = CutoffKernel::build(spec, 5.0, 64).unwrap();
        assert!((k.bstar - 0.7 * PI).abs() < 1e-12);
        let b0 = k.beta[0];
        assert!(k.beta.iter().all(|b| (b - b0).abs() < 1e-15));
    }

    #[test]
    fn cutoff_bound_holds_at_nodes() {
        for l in [0.5, 5.0, 200.0] {
            let k =
                CutoffKernel::build(KernelSpec::maxwell_singular(), l, 128).unwrap();
            for (b, _) in k.beta.iter().zip(&k.nodes) {
                assert!(*b <= l / k.bstar * (1.0 + 1e-15));
            }
        }
    }

    #[test]
    fn any_node_above_level_is_clipped() {
        let spec = KernelSpec::kac_power(2.0).unwrap();
        let l = 3.0;
        let k = CutoffKernel::build(spec, l, 128).unwrap();
        let mut clipped = 0;
        for (t, b) in k.nodes.iter().zip(&k.beta) {
            let raw = spec.eval(*t).unwrap();
            if raw > l {
                assert!((b * k.bstar - l).abs() < 1e-12);
                clipped += 1;
            }
        }
        assert!(clipped > 0, "cut-off never active");
    }

    #[test]
    fn normalization_is_exact() {
        for l in [1.0, 5.0, 100.0] {
            let k =
                CutoffKernel::build(KernelSpec::maxwell_singular(), l, 256).unwrap();
            assert!((k.normalization() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bstar_matches_closed_form_maxwell() {
        // oracle: exact antiderivative of min((1-c)^(-5/4), l) over the sphere
        for l in [1.0, 5.0, 10.0, 100.0, 1000.0] {
            let k =
                CutoffKernel::build(KernelSpec::maxwell_singular(), l, 256).unwrap();
            let exact = bstar_maxwell_exact(l);
            assert!(
                (k.bstar / exact - 1.0).abs() < 1e-10,
                "l={l}: {} vs {exact}",
                k.bstar
            );
        }
    }

    #[test]
    fn bstar_matches_closed_form_kac() {
        for gamma in [1.5, 2.0, 2.5] {
            for l in [2.0, 5.0, 40.0] {
                let spec = KernelSpec::kac_power(gamma).unwrap();
                let k = CutoffKernel::build(spec, l, 256).unwrap();
                let exact = bstar_kac_exact(gamma, l);
                assert!(
                    (k.bstar / exact - 1.0).abs() < 1e-10,
                    "gamma={gamma} l={l}: {} vs {exact}",
                    k.bstar
                );
            }
        }
    }

    #[test]
    fn bstar_nondecreasing_in_level() {
        let spec = KernelSpec::kac_power(2.0).unwrap();
        let mut prev = 0.0;
        for l in [0.5, 1.0, 2.0, 5.0, 10.0, 100.0] {
            let k = CutoffKernel::build(spec, l, 256).unwrap();
            assert!(k.bstar >= prev);
            prev = k.bstar;
        }
    }

    #[test]
    fn bbar_increases_to_b_pointwise() {
        let spec = KernelSpec::maxwell_singular();
        let theta = 0.3;
        let b = spec.eval(theta).unwrap();
        let mut prev = 0.0;
        for l in [1.0, 10.0, 100.0, 1e6] {
            let bbar = spec.eval(theta).unwrap().min(l);
            assert!(bbar >= prev);
            prev = bbar;
        }
        assert!((prev - b).abs() < 1e-12, "bbar should reach b for large l");
    }

    #[test]
    fn maxwell_bstar_diverges_with_level() {
        // non-integrable singularity: bstar ~ l^(1/5) -> infinity
        let mut prev = 0.0;
        for l in [1.0, 10.0, 100.0, 1000.0] {
            let k =
                CutoffKernel::build(KernelSpec::maxwell_singular(), l, 256).unwrap();
            assert!(k.bstar > prev * 1.2, "growth stalled at l={l}");
            prev = k.bstar;
        }
    }

    #[test]
    fn invalid_build_params_rejected() {
        let spec = KernelSpec::maxwell_singular();
        assert!(CutoffKernel::build(spec, 0.0, 64).is_err());
        assert!(CutoffKernel::build(spec, 5.0, 1).is_err());
    }
}
