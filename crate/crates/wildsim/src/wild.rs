//! The Wild series for the cut-off collision equation, its time-stepped
//! solver, and an independent Runge-Kutta integrator used as a mutual oracle.
//!
//! In the series time variable `tau` the solution of the cut-off problem is
//! `exp(-tau) * sum_k phi_k * (1 - exp(-tau))^k`, where `phi_0` is the
//! initial transform and `phi_{k+1}` averages collision products of earlier
//! coefficients. Every coefficient is again the transform of a probability
//! density, so `phi_k(0) = 1` and `sup |phi_k| <= 1`; truncating after `N`
//! terms therefore drops at most `(1 - exp(-tau))^(N+1)` in sup norm, which
//! is the a-priori bound used to pick `N`.
//!
//! Physical time enters through `tau = bstar * t`. Because the truncation
//! order needed for one series grows like `exp(tau)`, the solver advances in
//! substeps of bounded `tau`, restarting the expansion from the current
//! state; the semigroup property makes this exact up to the per-step
//! truncation bounds, which are accumulated and reported.
//!
//! Each assembled state is renormalized by dividing by its value at `r = 0`.
//! That value is `1 - tail` exactly (all coefficients equal 1 there), so the
//! division compensates the dropped tail to first order and restores the
//! mass normalization without distorting the profile.

use crate::error::{Error, Result};
use crate::kernels::CutoffKernel;
use crate::spectral::{SpectralGrid, SpectralState, StencilTable, DEFAULT_STENCIL_WIDTH};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Slack on the `sup |phi_k| <= 1` coefficient invariant.
pub const WILD_SUP_TOL: f64 = 1e-10;

/// Slack on the ODE stability check `sup |fhat| <= 1`.
pub const ODE_SUP_TOL: f64 = 1e-8;

/// Solver knobs. The defaults match the grid defaults (`M = 257`,
/// `r_max = 16`, 256 quadrature nodes).
#[derive(Debug, Clone, Copy)]
pub struct WildParams {
    /// Total truncation budget: the summed per-step tail bounds stay below this.
    pub accuracy: f64,
    /// Largest series substep in `tau`.
    pub tau_step_max: f64,
    /// Refuse truncation orders beyond this cap.
    pub order_cap: usize,
    /// Interpolation stencil width.
    pub stencil_width: usize,
}

impl Default for WildParams {
    fn default() -> Self {
        Self {
            accuracy: 1e-8,
            tau_step_max: 0.5,
            order_cap: 2000,
            stencil_width: DEFAULT_STENCIL_WIDTH,
        }
    }
}

/// Precomputed collision-splitting queries for a (grid, kernel) pair:
/// interpolation stencils at `r_i * split_cos_q` and `r_i * split_sin_q`,
/// plus the combined quadrature weights `w_q * beta_q`.
#[derive(Debug)]
pub struct CollisionGeometry {
    pub grid: Arc<SpectralGrid>,
    pub kernel: CutoffKernel,
    q: usize,
    wbeta: Vec<f64>,
    plus: StencilTable,
    minus: StencilTable,
}

impl CollisionGeometry {
    pub fn new(
        grid: Arc<SpectralGrid>,
        kernel: CutoffKernel,
        stencil_width: usize,
    ) -> Result<Self> {
        if kernel.mode() != grid.mode {
            return Err(Error::Config(format!(
                "kernel mode {} does not match grid mode {}",
                kernel.mode(),
                grid.mode
            )));
        }
        let r_max = grid.r_max();
        // closure of the collision geometry: split factors lie in [0, 1],
        // so no query ever leaves the grid
        for (c, s) in kernel.split_cos.iter().zip(&kernel.split_sin) {
            if !(0.0..=1.0).contains(c) || !(0.0..=1.0).contains(s) {
                return Err(Error::Domain(format!(
                    "collision split factors ({c}, {s}) outside [0, 1]"
                )));
            }
        }
        let q = kernel.nodes.len();
        let m = grid.len();
        let mut pts_plus = Vec::with_capacity(m * q);
        let mut pts_minus = Vec::with_capacity(m * q);
        for &r in &grid.nodes {
            for (c, s) in kernel.split_cos.iter().zip(&kernel.split_sin) {
                debug_assert!(r * c <= r_max && r * s <= r_max);
                pts_plus.push(r * c);
                pts_minus.push(r * s);
            }
        }
        let plus = StencilTable::build(&grid, &pts_plus, stencil_width)?;
        let minus = StencilTable::build(&grid, &pts_minus, stencil_width)?;
        let wbeta = kernel
            .weights
            .iter()
            .zip(&kernel.beta)
            .map(|(w, b)| w * b)
            .collect();
        Ok(Self {
            grid,
            kernel,
            q,
            wbeta,
            plus,
            minus,
        })
    }

    /// Interpolates `values` at all plus/minus query points. The quadrature
    /// weights are folded into the plus factors, so a collision integral is
    /// a plain dot product per row.
    fn eval_pair(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut plus = vec![0.0; self.plus.len()];
        let mut minus = vec![0.0; self.minus.len()];
        self.plus.eval_into(values, &mut plus);
        self.minus.eval_into(values, &mut minus);
        for row in plus.chunks_mut(self.q) {
            for (v, wb) in row.iter_mut().zip(&self.wbeta) {
                *v *= wb;
            }
        }
        (plus, minus)
    }

    /// `sum_q w_q beta_q phi(r c_q) psi(r s_q)` for every grid radius, using
    /// pre-evaluated factor tables.
    fn pair_integral_into(plus: &[f64], minus: &[f64], q: usize, out: &mut [f64]) {
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let a = &plus[i * q..(i + 1) * q];
            let b = &minus[i * q..(i + 1) * q];
            *o += a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        });
    }
}

/// Ordered Wild coefficients `phi_0 .. phi_N` on a grid, with cached factor
/// evaluations for the recursion.
pub struct WildSeries {
    pub geometry: Arc<CollisionGeometry>,
    coefficients: Vec<Vec<f64>>,
    plus_evals: Vec<Vec<f64>>,
    minus_evals: Vec<Vec<f64>>,
    /// Largest `sup |phi_k|` seen while extending (diagnostics).
    pub max_coefficient_sup: f64,
    time_base: f64,
}

/// Result of assembling a series at a given `tau`.
#[derive(Debug, Clone)]
pub struct Assembled {
    pub state: SpectralState,
    /// A-priori sup bound on the dropped tail, `(1 - exp(-tau))^(N+1)`.
    pub tail_bound: f64,
}

impl WildSeries {
    /// Starts a series from an initial transform: `phi_0 = f0hat`.
    pub fn init(f0hat: &SpectralState, geometry: Arc<CollisionGeometry>) -> Result<Self> {
        if f0hat.values[0] != 1.0 {
            return Err(Error::Normalization(
                "Wild series requires fhat(0) = 1 exactly".into(),
            ));
        }
        if !Arc::ptr_eq(&f0hat.grid, &geometry.grid) && f0hat.grid.nodes != geometry.grid.nodes {
            return Err(Error::Config(
                "state grid does not match collision geometry grid".into(),
            ));
        }
        let (p, m) = geometry.eval_pair(&f0hat.values);
        let sup = f0hat.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Self {
            geometry,
            coefficients: vec![f0hat.values.clone()],
            plus_evals: vec![p],
            minus_evals: vec![m],
            max_coefficient_sup: sup,
            time_base: f0hat.time_label,
        })
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficient(&self, k: usize) -> &[f64] {
        &self.coefficients[k]
    }

    /// Appends the next coefficient:
    /// `phi_{k+1} = (1/(k+1)) sum_{j=0}^{k} <phi_j(r c) phi_{k-j}(r s)>_beta`.
    pub fn extend(&mut self) -> Result<()> {
        let geo = &self.geometry;
        let k = self.order();
        let m = geo.grid.len();
        let mut new = vec![0.0; m];
        for j in 0..=k {
            CollisionGeometry::pair_integral_into(
                &self.plus_evals[j],
                &self.minus_evals[k - j],
                geo.q,
                &mut new,
            );
        }
        let scale = 1.0 / (k + 1) as f64;
        for v in &mut new {
            *v *= scale;
        }
        // the exact integral at r = 0 is sum w beta = 1; pin it
        new[0] = 1.0;
        let sup = new.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if sup > 1.0 + WILD_SUP_TOL {
            return Err(Error::Resolution(format!(
                "Wild coefficient {} exceeds the probability bound: sup = {sup}; \
                 refine the quadrature or grid",
                k + 1
            )));
        }
        self.max_coefficient_sup = self.max_coefficient_sup.max(sup);
        let (p, mi) = geo.eval_pair(&new);
        self.coefficients.push(new);
        self.plus_evals.push(p);
        self.minus_evals.push(mi);
        Ok(())
    }

    /// Assembles the truncated series at series time `tau` and renormalizes
    /// the origin value to exactly 1 (dividing the whole profile by the
    /// pre-renormalization origin value `1 - tail`).
    pub fn assemble(&self, tau: f64) -> Result<Assembled> {
        if !(tau >= 0.0) {
            return Err(Error::Config(format!("tau must be nonnegative, got {tau}")));
        }
        let n = self.order();
        let x = -(-tau).exp_m1(); // 1 - e^{-tau}
        let mut weight = (-tau).exp();
        let m = self.geometry.grid.len();
        let mut values = vec![0.0; m];
        for coeff in &self.coefficients {
            for (v, c) in values.iter_mut().zip(coeff) {
                *v += weight * c;
            }
            weight *= x;
        }
        let origin = values[0];
        for v in &mut values {
            *v /= origin;
        }
        values[0] = 1.0;
        let tail_bound = x.powi(n as i32 + 1);
        let state = SpectralState::new(self.geometry.grid.clone(), values, self.time_base)?;
        Ok(Assembled { state, tail_bound })
    }

    /// Like [`assemble`](Self::assemble) but fails if the tail bound misses
    /// the requested accuracy.
    pub fn assemble_checked(&self, tau: f64, accuracy: f64) -> Result<Assembled> {
        let out = self.assemble(tau)?;
        if out.tail_bound > accuracy {
            return Err(Error::Truncation(format!(
                "truncation tail bound {:.3e} exceeds requested accuracy {accuracy:.3e}; \
                 extend the series beyond order {}",
                out.tail_bound,
                self.order()
            )));
        }
        Ok(out)
    }
}

/// Truncation order needed for one series of step `tau` at the given accuracy.
fn required_order(tau: f64, accuracy: f64) -> usize {
    let x = -(-tau).exp_m1();
    if x <= 0.0 {
        return 1;
    }
    let n = (accuracy.ln() / x.ln()).ceil() as usize;
    n.max(1)
}

#[derive(Debug, Clone, Serialize)]
pub struct WildDiagnostics {
    /// Cumulative per-step tail bounds.
    pub tail_bound: f64,
    /// Largest coefficient sup norm across the whole run.
    pub max_coefficient_sup: f64,
    /// Number of series substeps taken.
    pub steps: usize,
    /// Total number of coefficients computed.
    pub total_order: usize,
}

pub struct WildOutcome {
    pub state: SpectralState,
    pub diagnostics: WildDiagnostics,
}

/// Advances `f0hat` to physical time `t` through the Wild expansion of the
/// cut-off problem (`tau = bstar * t`, substepped).
pub fn solve_wild(
    f0hat: &SpectralState,
    kernel: &CutoffKernel,
    t: f64,
    params: &WildParams,
) -> Result<WildOutcome> {
    let outcomes = solve_wild_snapshots(f0hat, kernel, &[t], params)?;
    Ok(outcomes.into_iter().next().unwrap())
}

/// Solves at several increasing times, reusing the solution as it advances.
pub fn solve_wild_snapshots(
    f0hat: &SpectralState,
    kernel: &CutoffKernel,
    times: &[f64],
    params: &WildParams,
) -> Result<Vec<WildOutcome>> {
    if times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Config("snapshot times must be nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("snapshot times must be nondecreasing".into()));
    }
    let geometry = Arc::new(CollisionGeometry::new(
        f0hat.grid.clone(),
        kernel.clone(),
        params.stencil_width,
    )?);
    let total_tau: f64 = kernel.bstar * times.last().copied().unwrap_or(0.0);
    let total_steps = (total_tau / params.tau_step_max).ceil().max(1.0);
    let step_accuracy = params.accuracy / total_steps;

    let mut current = f0hat.clone();
    let mut diag = WildDiagnostics {
        tail_bound: 0.0,
        max_coefficient_sup: 0.0,
        steps: 0,
        total_order: 0,
    };
    let mut out = Vec::with_capacity(times.len());
    let mut t_now = f0hat.time_label;
    for &t in times {
        let dtau_total = kernel.bstar * (t - t_now);
        if dtau_total > 0.0 {
            let n_steps = (dtau_total / params.tau_step_max).ceil().max(1.0) as usize;
            let dtau = dtau_total / n_steps as f64;
            let order = required_order(dtau, step_accuracy);
            if order > params.order_cap {
                return Err(Error::Truncation(format!(
                    "step tau = {dtau:.3} needs truncation order {order} > cap {}; \
                     use a smaller time horizon or raise the cap",
                    params.order_cap
                )));
            }
            for _ in 0..n_steps {
                let mut series = WildSeries::init(&current, geometry.clone())?;
                for _ in 0..order {
                    series.extend()?;
                }
                let assembled = series.assemble(dtau)?;
                current = assembled.state;
                diag.tail_bound += assembled.tail_bound;
                diag.max_coefficient_sup =
                    diag.max_coefficient_sup.max(series.max_coefficient_sup);
                diag.steps += 1;
                diag.total_order += order;
            }
        }
        t_now = t;
        current.time_label = t;
        out.push(WildOutcome {
            state: current.clone(),
            diagnostics: diag.clone(),
        });
    }
    Ok(out)
}

/// Stability-rule step for the fourth-order integrator: the relaxation rate
/// in physical time is `bstar`, and the step keeps `bstar * dt = 0.1`, far
/// inside the RK4 real-axis stability limit of 2.785.
pub fn stable_dt(kernel: &CutoffKernel) -> f64 {
    0.1 / kernel.bstar
}

/// Classical RK4 on the cut-off Fourier equation in physical time:
/// `d fhat / dt = bstar * ( <fhat(r c) fhat(r s)>_beta - fhat * fhat(0) )`.
pub fn solve_ode(
    f0hat: &SpectralState,
    kernel: &CutoffKernel,
    t: f64,
    dt: f64,
) -> Result<SpectralState> {
    Ok(solve_ode_snapshots(f0hat, kernel, &[t], dt)?
        .into_iter()
        .next()
        .unwrap())
}

pub fn solve_ode_snapshots(
    f0hat: &SpectralState,
    kernel: &CutoffKernel,
    times: &[f64],
    dt: f64,
) -> Result<Vec<SpectralState>> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("snapshot times must be nondecreasing".into()));
    }
    let geometry = CollisionGeometry::new(
        f0hat.grid.clone(),
        kernel.clone(),
        DEFAULT_STENCIL_WIDTH,
    )?;
    let bstar = kernel.bstar;
    let m = f0hat.grid.len();

    let rhs = |values: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.resize(m, 0.0);
        let (plus, minus) = geometry.eval_pair(values);
        CollisionGeometry::pair_integral_into(&plus, &minus, geometry.q, out);
        let mass = values[0];
        for (o, v) in out.iter_mut().zip(values) {
            *o = bstar * (*o - v * mass);
        }
        // the gain and loss terms cancel exactly at the origin
        out[0] = 0.0;
    };

    let mut v = f0hat.values.clone();
    let mut t_now = f0hat.time_label;
    let mut out_states = Vec::with_capacity(times.len());
    let (mut k1, mut k2, mut k3, mut k4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut stage = vec![0.0; m];
    for &t in times {
        let span = t - t_now;
        if span > 0.0 {
            let n = (span / dt).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for _ in 0..n {
                rhs(&v, &mut k1);
                for i in 0..m {
                    stage[i] = v[i] + 0.5 * h * k1[i];
                }
                rhs(&stage, &mut k2);
                for i in 0..m {
                    stage[i] = v[i] + 0.5 * h * k2[i];
                }
                rhs(&stage, &mut k3);
                for i in 0..m {
                    stage[i] = v[i] + h * k3[i];
                }
                rhs(&stage, &mut k4);
                for i in 0..m {
                    v[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                let sup = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
                if sup > 1.0 + ODE_SUP_TOL {
                    return Err(Error::Resolution(format!(
                        "time-stepping instability: sup |fhat| = {sup} > 1; reduce dt"
                    )));
                }
            }
        }
        t_now = t;
        out_states.push(SpectralState::new(f0hat.grid.clone(), v.clone(), t)?);
    }
    Ok(out_states)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub level: f64,
    pub bstar: f64,
    /// Sup difference from the previous level's state over the comparison window.
    pub sup_diff_prev: Option<f64>,
}

pub struct SweepResult {
    pub states: Vec<SpectralState>,
    pub entries: Vec<SweepEntry>,
}

/// Solves at each cut-off level and reports consecutive sup differences on
/// the window `r <= min(8, r_max)`, the operational diagnostic for the
/// `l -> infinity` limit.
pub fn cutoff_sweep(
    f0hat: &SpectralState,
    spec: crate::kernels::KernelSpec,
    levels: &[f64],
    t: f64,
    quad_nodes: usize,
    params: &WildParams,
) -> Result<SweepResult> {
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "cut-off levels must be strictly increasing".into(),
        ));
    }
    let window = 8.0f64.min(f0hat.grid.r_max());
    let mut states: Vec<SpectralState> = Vec::new();
    let mut entries = Vec::new();
    for &l in levels {
        let kernel = CutoffKernel::build(spec, l, quad_nodes)?;
        let outcome = solve_wild(f0hat, &kernel, t, params)?;
        let sup_diff_prev = states.last().map(|prev| {
            prev.values
                .iter()
                .zip(&outcome.state.values)
                .zip(&f0hat.grid.nodes)
                .filter(|(_, r)| **r <= window)
                .map(|((a, b), _)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        entries.push(SweepEntry {
            level: l,
            bstar: kernel.bstar,
            sup_diff_prev,
        });
        states.push(outcome.state);
    }
    Ok(SweepResult { states, entries })
}
