//! Batch workflows behind the CLI subcommands: simulate, verify-envelope,
//! convergence-study and kernel-table. Every output embeds the fully
//! resolved configuration, and identical configurations produce byte
//! identical files.

use crate::config::{EnvelopeChoice, RunConfig};
use crate::envelopes::{
    build_envelope, certify_propagation, check_subadditivity, EnvelopeTuning, GevreyEnvelope,
    PropagationReport, CERTIFICATION_SLACK, SUBADDITIVITY_SLACK,
};
use crate::error::{Error, Result};
use crate::initial_data::{default_s_grid, fit_decay, DecayFit};
use crate::kernels::{bstar_kac_exact, bstar_maxwell_exact, CutoffKernel, KernelFamily};
use crate::moments::{conservation_report, ConservationReport};
use crate::spectral::{write_states_csv, SpectralState};
use crate::wild::{
    cutoff_sweep, solve_ode_snapshots, solve_wild_snapshots, SweepEntry, WildDiagnostics,
};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Sample counts for the sub-additivity gate in `verify-envelope`
/// (`>= 10^6` samples total).
const SUBADD_N_R: usize = 2048;
const SUBADD_N_THETA: usize = 512;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(())
}

fn config_metadata(cfg: &RunConfig) -> Vec<String> {
    cfg.render().lines().map(|l| l.to_string()).collect()
}

#[derive(Serialize)]
struct CrossCheckEntry {
    time_label: f64,
    wild_vs_ode_sup_diff: f64,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    config: &'a RunConfig,
    wild: WildDiagnostics,
    conservation: ConservationReport,
    cross_check: Option<Vec<CrossCheckEntry>>,
}

pub struct SimulateOutcome {
    pub snapshots: Vec<SpectralState>,
    pub snapshots_csv: PathBuf,
    pub report_json: PathBuf,
}

/// Runs the Wild solver at the configured snapshot times; optionally
/// cross-checks against the fourth-order integrator.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let grid = cfg.grid()?;
    let kernel = CutoffKernel::build(cfg.kernel_spec()?, cfg.cutoff_level, cfg.quad_nodes)?;
    let datum = cfg.datum_spec().realize(&grid)?;
    let times = cfg.resolved_snapshots();
    let outcomes = solve_wild_snapshots(&datum, &kernel, &times, &cfg.wild_params())?;
    let snapshots: Vec<SpectralState> = outcomes.iter().map(|o| o.state.clone()).collect();
    let diagnostics = outcomes.last().unwrap().diagnostics.clone();

    let cross_check = if cfg.cross_check {
        let dt = cfg.ode_dt_factor / kernel.bstar;
        let ode = solve_ode_snapshots(&datum, &kernel, &times, dt)?;
        Some(
            snapshots
                .iter()
                .zip(&ode)
                .map(|(w, o)| CrossCheckEntry {
                    time_label: w.time_label,
                    wild_vs_ode_sup_diff: w
                        .values
                        .iter()
                        .zip(&o.values)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max),
                })
                .collect(),
        )
    } else {
        None
    };

    let snapshots_csv = cfg.out_dir.join("snapshots.csv");
    write_states_csv(&snapshots_csv, &snapshots, &config_metadata(cfg))?;
    let conservation = conservation_report(&snapshots).or_else(|_| {
        // single-snapshot runs still get a (trivial) report
        conservation_report(&[snapshots[0].clone(), snapshots[0].clone()])
    })?;
    let report = SimulateReport {
        config: cfg,
        wild: diagnostics,
        conservation,
        cross_check,
    };
    let report_json = cfg.out_dir.join("diagnostics.json");
    write_json(&report_json, &report)?;
    Ok(SimulateOutcome {
        snapshots,
        snapshots_csv,
        report_json,
    })
}

#[derive(Serialize)]
struct Certificate<'a> {
    config: &'a RunConfig,
    fit: Option<DecayFit>,
    envelope: &'a GevreyEnvelope,
    subadditivity_max_violation: f64,
    subadditivity_pass: bool,
    propagation: Option<&'a PropagationReport>,
    pass: bool,
}

pub struct VerifyOutcome {
    pub envelope: GevreyEnvelope,
    pub report: Option<PropagationReport>,
    pub certificate_json: PathBuf,
    pub pass: bool,
}

/// Builds (or fits) the envelope, gates it through the sub-additivity scan,
/// then certifies propagation along a simulation. A positive sub-additivity
/// violation fails the certificate before any simulation runs.
pub fn cmd_verify_envelope(cfg: &RunConfig) -> Result<VerifyOutcome> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let grid = cfg.grid()?;
    let datum = cfg.datum_spec().realize(&grid)?;
    let tuning = EnvelopeTuning {
        k_quad: cfg.k_quad,
        tail_fraction: cfg.tail_fraction,
    };
    let (fit, envelope) = match cfg.envelope {
        EnvelopeChoice::Fit => {
            let fit = fit_decay(&datum, &default_s_grid())?;
            let psi = crate::envelopes::PsiFunction::power(fit.s.min(2.0))?;
            let env = build_envelope(&datum, fit.k1, fit.k2, psi, cfg.r0, &tuning)?;
            (Some(fit), env)
        }
        EnvelopeChoice::Explicit => {
            let psi = cfg.psi_function()?;
            let env = build_envelope(&datum, cfg.k1, cfg.k2, psi, cfg.r0, &tuning)?;
            (None, env)
        }
    };
    let violation = check_subadditivity(&envelope, SUBADD_N_R, SUBADD_N_THETA, cfg.mode);
    let subadditivity_pass = violation <= SUBADDITIVITY_SLACK;
    let certificate_json = cfg.out_dir.join("certificate.json");
    if !subadditivity_pass {
        let cert = Certificate {
            config: cfg,
            fit,
            envelope: &envelope,
            subadditivity_max_violation: violation,
            subadditivity_pass,
            propagation: None,
            pass: false,
        };
        write_json(&certificate_json, &cert)?;
        return Err(Error::CertificateFailed(format!(
            "sub-additivity violated by {violation:.3e} (split radius r0 = {} below \
             the admissible minimum {}?); certificate written to {}",
            envelope.r0,
            envelope.derivation.r0_min,
            certificate_json.display()
        )));
    }
    let kernel = CutoffKernel::build(cfg.kernel_spec()?, cfg.cutoff_level, cfg.quad_nodes)?;
    let times = cfg.resolved_snapshots();
    let outcomes = solve_wild_snapshots(&datum, &kernel, &times, &cfg.wild_params())?;
    let snapshots: Vec<SpectralState> = outcomes.into_iter().map(|o| o.state).collect();
    write_states_csv(
        cfg.out_dir.join("snapshots.csv"),
        &snapshots,
        &config_metadata(cfg),
    )?;
    let report = certify_propagation(&snapshots, &envelope, CERTIFICATION_SLACK);
    let pass = report.pass;
    let cert = Certificate {
        config: cfg,
        fit,
        envelope: &envelope,
        subadditivity_max_violation: violation,
        subadditivity_pass,
        propagation: Some(&report),
        pass,
    };
    write_json(&certificate_json, &cert)?;
    if !pass {
        return Err(Error::CertificateFailed(format!(
            "propagation certificate FAILED; see {}",
            certificate_json.display()
        )));
    }
    Ok(VerifyOutcome {
        envelope,
        report: Some(report),
        certificate_json,
        pass,
    })
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    config: &'a RunConfig,
    levels: Vec<SweepEntry>,
    /// Sup difference of the first level's solution under simultaneous
    /// grid + quadrature doubling, measured on the shared nodes.
    refinement_sup_diff: f64,
}

pub struct ConvergenceOutcome {
    pub entries: Vec<SweepEntry>,
    pub refinement_sup_diff: f64,
    pub table_csv: PathBuf,
}

/// Cut-off convergence study: solves at each level and reports consecutive
/// sup differences plus a grid/quadrature refinement diagnostic.
pub fn cmd_convergence_study(cfg: &RunConfig) -> Result<ConvergenceOutcome> {
    if cfg.cutoff_levels.len() < 2 {
        return Err(Error::Config(
            "convergence study needs at least 2 cut-off levels".into(),
        ));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let grid = cfg.grid()?;
    let spec = cfg.kernel_spec()?;
    let datum = cfg.datum_spec().realize(&grid)?;
    let params = cfg.wild_params();
    let sweep = cutoff_sweep(
        &datum,
        spec,
        &cfg.cutoff_levels,
        cfg.t_final,
        cfg.quad_nodes,
        &params,
    )?;

    // refinement diagnostic on the first level: double grid and quadrature
    let mut fine_cfg = cfg.clone();
    fine_cfg.grid_points = 2 * cfg.grid_points - 1;
    fine_cfg.quad_nodes = 2 * cfg.quad_nodes;
    let fine_grid = fine_cfg.grid()?;
    let fine_datum = fine_cfg.datum_spec().realize(&fine_grid)?;
    let level = cfg.cutoff_levels[0];
    let coarse_kernel = CutoffKernel::build(spec, level, cfg.quad_nodes)?;
    let fine_kernel = CutoffKernel::build(spec, level, fine_cfg.quad_nodes)?;
    let coarse = crate::wild::solve_wild(&datum, &coarse_kernel, cfg.t_final, &params)?;
    let fine = crate::wild::solve_wild(&fine_datum, &fine_kernel, cfg.t_final, &params)?;
    let refinement_sup_diff = if cfg.geometric_spacing {
        // geometric grids do not nest; compare through interpolation
        coarse
            .state
            .grid
            .nodes
            .iter()
            .zip(&coarse.state.values)
            .map(|(r, v)| (fine.state.interpolate(*r).unwrap_or(*v) - v).abs())
            .fold(0.0, f64::max)
    } else {
        (0..cfg.grid_points)
            .map(|i| (coarse.state.values[i] - fine.state.values[2 * i]).abs())
            .fold(0.0, f64::max)
    };

    let table_csv = cfg.out_dir.join("convergence.csv");
    {
        let mut f = std::io::BufWriter::new(std::fs::File::create(&table_csv)?);
        for line in config_metadata(cfg) {
            writeln!(f, "# {line}")?;
        }
        writeln!(f, "kind,level,bstar,sup_diff")?;
        for e in &sweep.entries {
            writeln!(
                f,
                "level,{:.16e},{:.16e},{}",
                e.level,
                e.bstar,
                e.sup_diff_prev
                    .map_or(String::new(), |d| format!("{d:.16e}"))
            )?;
        }
        writeln!(
            f,
            "refinement,{:.16e},{:.16e},{refinement_sup_diff:.16e}",
            level, coarse_kernel.bstar
        )?;
        let _ = fine_kernel;
    }
    let report = ConvergenceReport {
        config: cfg,
        levels: sweep.entries.clone(),
        refinement_sup_diff,
    };
    write_json(&cfg.out_dir.join("convergence.json"), &report)?;
    Ok(ConvergenceOutcome {
        entries: sweep.entries,
        refinement_sup_diff,
        table_csv,
    })
}

pub struct KernelTableOutcome {
    pub table_csv: PathBuf,
}

/// Tabulates cut-off kernels over the configured levels: total mass, the
/// closed-form reference where one exists, the normalization residual and
/// the largest normalized kernel value.
pub fn cmd_kernel_table(cfg: &RunConfig) -> Result<KernelTableOutcome> {
    if cfg.cutoff_levels.is_empty() {
        return Err(Error::Config("kernel table needs cut-off levels".into()));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let spec = cfg.kernel_spec()?;
    let table_csv = cfg.out_dir.join("kernel_table.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&table_csv)?);
    for line in config_metadata(cfg) {
        writeln!(f, "# {line}")?;
    }
    writeln!(f, "level,bstar,bstar_closed_form,normalization_residual,beta_max")?;
    for &l in &cfg.cutoff_levels {
        let k = CutoffKernel::build(spec, l, cfg.quad_nodes)?;
        let closed = match spec.family {
            KernelFamily::MaxwellSingular => Some(bstar_maxwell_exact(l)),
            KernelFamily::KacPower { gamma, scale } if scale == 1.0 => {
                Some(bstar_kac_exact(gamma, l))
            }
            _ => None,
        };
        let resid = (k.normalization() - 1.0).abs();
        let beta_max = k.beta.iter().fold(0.0f64, |a, b| a.max(*b));
        writeln!(
            f,
            "{l:.16e},{:.16e},{},{resid:.16e},{beta_max:.16e}",
            k.bstar,
            closed.map_or(String::new(), |c| format!("{c:.16e}"))
        )?;
    }
    drop(f);
    Ok(KernelTableOutcome { table_csv })
}
