//! Run configuration: a plain-text `key = value` file format plus typed
//! accessors. Flag overrides from the CLI are applied as key/value pairs on
//! top of the file, so flags win. Rendering uses the shortest decimal that
//! round-trips each float, making `parse(render(c)) == c` bit-exact.

use crate::envelopes::{PsiFunction, DEFAULT_K_QUAD, DEFAULT_TAIL_FRACTION};
use crate::error::{Error, Result};
use crate::initial_data::DatumSpec;
use crate::kernels::KernelSpec;
use crate::spectral::{GridSpacing, Mode, SpectralGrid, DEFAULT_STENCIL_WIDTH};
use crate::wild::WildParams;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelChoice {
    KacPower,
    Maxwell,
    KacConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatumChoice {
    Gaussian,
    Mixture,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiChoice {
    Power,
    SqrtLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeChoice {
    Fit,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub kernel: KernelChoice,
    pub gamma: f64,
    pub kernel_scale: f64,
    pub constant_value: f64,
    pub cutoff_level: f64,
    pub cutoff_levels: Vec<f64>,
    pub quad_nodes: usize,
    pub r_max: f64,
    pub grid_points: usize,
    pub geometric_spacing: bool,
    pub geometric_first: f64,
    pub datum: DatumChoice,
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
    pub bump_half_width: f64,
    pub bump_nu: f64,
    pub t_final: f64,
    pub snapshots: Vec<f64>,
    pub accuracy: f64,
    pub tau_step: f64,
    pub order_cap: usize,
    pub stencil_width: usize,
    pub envelope: EnvelopeChoice,
    pub k1: f64,
    pub k2: f64,
    pub psi: PsiChoice,
    pub s: f64,
    /// `None` means the smallest admissible split radius.
    pub r0: Option<f64>,
    pub k_quad: f64,
    pub tail_fraction: f64,
    pub cross_check: bool,
    pub ode_dt_factor: f64,
    pub out_dir: PathBuf,
    /// Reserved for future stochastic paths; unused by the deterministic solvers.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Kac1d,
            kernel: KernelChoice::KacPower,
            gamma: 2.0,
            kernel_scale: 1.0,
            constant_value: 1.0,
            cutoff_level: 5.0,
            cutoff_levels: vec![5.0, 10.0, 20.0, 40.0],
            quad_nodes: 256,
            r_max: 16.0,
            grid_points: 257,
            geometric_spacing: false,
            geometric_first: 0.015625,
            datum: DatumChoice::Gaussian,
            weights: vec![0.5, 0.5],
            variances: vec![0.5, 1.5],
            bump_half_width: 1.0,
            bump_nu: 2.0,
            t_final: 1.0,
            snapshots: vec![],
            accuracy: 1e-8,
            tau_step: 0.5,
            order_cap: 2000,
            stencil_width: DEFAULT_STENCIL_WIDTH,
            envelope: EnvelopeChoice::Fit,
            k1: 1.0,
            k2: 0.5,
            psi: PsiChoice::Power,
            s: 2.0,
            r0: None,
            k_quad: DEFAULT_K_QUAD,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            cross_check: false,
            ode_dt_factor: 0.1,
            out_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("key '{key}': expected a number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("key '{key}': expected an integer, got '{v}'")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    if v.trim().is_empty() {
        return Ok(vec![]);
    }
    v.split(',')
        .map(|p| parse_f64(key, p.trim()))
        .collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "key '{key}': expected true/false, got '{v}'"
        ))),
    }
}

impl RunConfig {
    /// Applies one `key = value` pair.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "mode" => {
                self.mode = match v {
                    "kac" => Mode::Kac1d,
                    "boltzmann" => Mode::BoltzmannRadial3d,
                    _ => return Err(Error::Config(format!("unknown mode '{v}'"))),
                }
            }
            "kernel" => {
                self.kernel = match v {
                    "kac-power" => KernelChoice::KacPower,
                    "maxwell" => KernelChoice::Maxwell,
                    "kac-constant" => KernelChoice::KacConstant,
                    _ => return Err(Error::Config(format!("unknown kernel '{v}'"))),
                }
            }
            "gamma" => self.gamma = parse_f64(key, v)?,
            "kernel-scale" => self.kernel_scale = parse_f64(key, v)?,
            "constant-value" => self.constant_value = parse_f64(key, v)?,
            "cutoff-level" => self.cutoff_level = parse_f64(key, v)?,
            "cutoff-levels" => self.cutoff_levels = parse_list(key, v)?,
            "quad-nodes" => self.quad_nodes = parse_usize(key, v)?,
            "rmax" => self.r_max = parse_f64(key, v)?,
            "grid-points" => self.grid_points = parse_usize(key, v)?,
            "spacing" => {
                self.geometric_spacing = match v {
                    "uniform" => false,
                    "geometric" => true,
                    _ => return Err(Error::Config(format!("unknown spacing '{v}'"))),
                }
            }
            "geometric-first" => self.geometric_first = parse_f64(key, v)?,
            "datum" => {
                self.datum = match v {
                    "gaussian" => DatumChoice::Gaussian,
                    "mixture" => DatumChoice::Mixture,
                    "bump" => DatumChoice::Bump,
                    _ => return Err(Error::Config(format!("unknown datum '{v}'"))),
                }
            }
            "weights" => self.weights = parse_list(key, v)?,
            "variances" => self.variances = parse_list(key, v)?,
            "bump-half-width" => self.bump_half_width = parse_f64(key, v)?,
            "bump-nu" => self.bump_nu = parse_f64(key, v)?,
            "t-final" => self.t_final = parse_f64(key, v)?,
            "snapshots" => self.snapshots = parse_list(key, v)?,
            "accuracy" => self.accuracy = parse_f64(key, v)?,
            "tau-step" => self.tau_step = parse_f64(key, v)?,
            "order-cap" => self.order_cap = parse_usize(key, v)?,
            "stencil-width" => self.stencil_width = parse_usize(key, v)?,
            "envelope" => {
                self.envelope = match v {
                    "fit" => EnvelopeChoice::Fit,
                    "explicit" => EnvelopeChoice::Explicit,
                    _ => return Err(Error::Config(format!("unknown envelope mode '{v}'"))),
                }
            }
            "k1" => self.k1 = parse_f64(key, v)?,
            "k2" => self.k2 = parse_f64(key, v)?,
            "psi" => {
                self.psi = match v {
                    "power" => PsiChoice::Power,
                    "sqrt-log" => PsiChoice::SqrtLog,
                    _ => return Err(Error::Config(format!("unknown psi '{v}'"))),
                }
            }
            "s" => self.s = parse_f64(key, v)?,
            "r0" => {
                self.r0 = if v == "auto" {
                    None
                } else {
                    Some(parse_f64(key, v)?)
                }
            }
            "k-quad" => self.k_quad = parse_f64(key, v)?,
            "tail-fraction" => self.tail_fraction = parse_f64(key, v)?,
            "cross-check" => self.cross_check = parse_bool(key, v)?,
            "ode-dt-factor" => self.ode_dt_factor = parse_f64(key, v)?,
            "out" => self.out_dir = PathBuf::from(v),
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| Error::Config(format!("key 'seed': bad integer '{v}'")))?
            }
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a `key = value` file (`#` starts a comment).
    pub fn from_str_config(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{raw}'",
                    lineno + 1
                )));
            };
            cfg.apply(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_str_config(&text)
    }

    /// Renders the fully resolved configuration; parsing the output
    /// reproduces `self` bit-exactly.
    pub fn render(&self) -> String {
        fn list(v: &[f64]) -> String {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        }
        let mut s = String::new();
        let mode = match self.mode {
            Mode::Kac1d => "kac",
            Mode::BoltzmannRadial3d => "boltzmann",
        };
        let kernel = match self.kernel {
            KernelChoice::KacPower => "kac-power",
            KernelChoice::Maxwell => "maxwell",
            KernelChoice::KacConstant => "kac-constant",
        };
        let datum = match self.datum {
            DatumChoice::Gaussian => "gaussian",
            DatumChoice::Mixture => "mixture",
            DatumChoice::Bump => "bump",
        };
        let psi = match self.psi {
            PsiChoice::Power => "power",
            PsiChoice::SqrtLog => "sqrt-log",
        };
        let envelope = match self.envelope {
            EnvelopeChoice::Fit => "fit",
            EnvelopeChoice::Explicit => "explicit",
        };
        let _ = writeln!(s, "mode = {mode}");
        let _ = writeln!(s, "kernel = {kernel}");
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "kernel-scale = {}", self.kernel_scale);
        let _ = writeln!(s, "constant-value = {}", self.constant_value);
        let _ = writeln!(s, "cutoff-level = {}", self.cutoff_level);
        let _ = writeln!(s, "cutoff-levels = {}", list(&self.cutoff_levels));
        let _ = writeln!(s, "quad-nodes = {}", self.quad_nodes);
        let _ = writeln!(s, "rmax = {}", self.r_max);
        let _ = writeln!(s, "grid-points = {}", self.grid_points);
        let _ = writeln!(
            s,
            "spacing = {}",
            if self.geometric_spacing {
                "geometric"
            } else {
                "uniform"
            }
        );
        let _ = writeln!(s, "geometric-first = {}", self.geometric_first);
        let _ = writeln!(s, "datum = {datum}");
        let _ = writeln!(s, "weights = {}", list(&self.weights));
        let _ = writeln!(s, "variances = {}", list(&self.variances));
        let _ = writeln!(s, "bump-half-width = {}", self.bump_half_width);
        let _ = writeln!(s, "bump-nu = {}", self.bump_nu);
        let _ = writeln!(s, "t-final = {}", self.t_final);
        let _ = writeln!(s, "snapshots = {}", list(&self.snapshots));
        let _ = writeln!(s, "accuracy = {}", self.accuracy);
        let _ = writeln!(s, "tau-step = {}", self.tau_step);
        let _ = writeln!(s, "order-cap = {}", self.order_cap);
        let _ = writeln!(s, "stencil-width = {}", self.stencil_width);
        let _ = writeln!(s, "envelope = {envelope}");
        let _ = writeln!(s, "k1 = {}", self.k1);
        let _ = writeln!(s, "k2 = {}", self.k2);
        let _ = writeln!(s, "psi = {psi}");
        let _ = writeln!(s, "s = {}", self.s);
        let _ = writeln!(
            s,
            "r0 = {}",
            self.r0.map_or("auto".to_string(), |x| format!("{x}"))
        );
        let _ = writeln!(s, "k-quad = {}", self.k_quad);
        let _ = writeln!(s, "tail-fraction = {}", self.tail_fraction);
        let _ = writeln!(s, "cross-check = {}", self.cross_check);
        let _ = writeln!(s, "ode-dt-factor = {}", self.ode_dt_factor);
        let _ = writeln!(s, "out = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// Kernel spec from the kernel keys, checked against the mode.
    pub fn kernel_spec(&self) -> Result<KernelSpec> {
        let spec = match self.kernel {
            KernelChoice::KacPower => KernelSpec::kac_power_scaled(self.gamma, self.kernel_scale)?,
            KernelChoice::Maxwell => KernelSpec::maxwell_singular(),
            KernelChoice::KacConstant => KernelSpec::kac_constant(self.constant_value)?,
        };
        if spec.mode() != self.mode {
            return Err(Error::Config(format!(
                "kernel '{:?}' runs in {} mode, but the configured mode is {}",
                self.kernel,
                spec.mode(),
                self.mode
            )));
        }
        Ok(spec)
    }

    pub fn grid(&self) -> Result<Arc<SpectralGrid>> {
        let spacing = if self.geometric_spacing {
            GridSpacing::Geometric {
                first: self.geometric_first,
            }
        } else {
            GridSpacing::Uniform
        };
        Ok(Arc::new(SpectralGrid::new(
            self.mode,
            self.r_max,
            self.grid_points,
            spacing,
        )?))
    }

    pub fn datum_spec(&self) -> DatumSpec {
        match self.datum {
            DatumChoice::Gaussian => DatumSpec::Gaussian,
            DatumChoice::Mixture => DatumSpec::GaussianMixture {
                weights: self.weights.clone(),
                variances: self.variances.clone(),
            },
            DatumChoice::Bump => DatumSpec::GevreyBump {
                half_width: self.bump_half_width,
                nu: self.bump_nu,
            },
        }
    }

    pub fn psi_function(&self) -> Result<PsiFunction> {
        match self.psi {
            PsiChoice::Power => PsiFunction::power(self.s),
            PsiChoice::SqrtLog => PsiFunction::sqrt_log(),
        }
    }

    pub fn wild_params(&self) -> WildParams {
        WildParams {
            accuracy: self.accuracy,
            tau_step_max: self.tau_step,
            order_cap: self.order_cap,
            stencil_width: self.stencil_width,
        }
    }

    /// Snapshot times: always starts at 0, then the configured times sorted.
    /// An empty snapshot list means "only t = 0".
    pub fn resolved_snapshots(&self) -> Vec<f64> {
        let mut times = vec![0.0];
        times.extend(self.snapshots.iter().copied());
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        times
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip_is_bit_exact() {
        let mut cfg = RunConfig::default();
        cfg.gamma = 1.7;
        cfg.accuracy = 3.000000000000001e-9;
        cfg.snapshots = vec![0.1, 0.30000000000000004, 5.0];
        cfg.r0 = Some(1.25);
        cfg.cross_check = true;
        cfg.datum = DatumChoice::Bump;
        let back = RunConfig::from_str_config(&cfg.render()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = RunConfig::from_str_config(
            "# a comment\n\nmode = boltzmann # trailing\nkernel = maxwell\n",
        )
        .unwrap();
        assert_eq!(cfg.mode, Mode::BoltzmannRadial3d);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(RunConfig::from_str_config("fish = 1\n").is_err());
    }

    #[test]
    fn kernel_mode_mismatch_is_caught() {
        let mut cfg = RunConfig::default();
        cfg.kernel = KernelChoice::Maxwell; // mode still kac
        assert!(cfg.kernel_spec().is_err());
        cfg.mode = Mode::BoltzmannRadial3d;
        assert!(cfg.kernel_spec().is_ok());
    }

    #[test]
    fn snapshots_resolution() {
        let mut cfg = RunConfig::default();
        cfg.snapshots = vec![];
        assert_eq!(cfg.resolved_snapshots(), vec![0.0]);
        cfg.snapshots = vec![2.0, 0.5, 2.0];
        assert_eq!(cfg.resolved_snapshots(), vec![0.0, 0.5, 2.0]);
    }
}
