//! Batch CLI for the Fourier-space kinetic simulator.
//!
//! Exit codes: 0 success (and certificate PASS), 2 configuration error,
//! 3 numerical-resolution error, 4 certificate FAIL.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use wildsim::config::RunConfig;
use wildsim::run;

#[derive(Parser)]
#[command(name = "wildsim", version, about = "Fourier-space Kac/Boltzmann simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Wild solver and write snapshots, moments and diagnostics.
    Simulate(CommonArgs),
    /// Build or fit a decay envelope, check sub-additivity, certify propagation.
    VerifyEnvelope(CommonArgs),
    /// Solve across increasing cut-off levels and tabulate sup differences.
    ConvergenceStudy(CommonArgs),
    /// Tabulate cut-off kernel masses and normalization residuals.
    KernelTable(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Configuration file (key = value lines); flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,

    /// kac | boltzmann
    #[arg(long)]
    mode: Option<String>,
    /// kac-power | maxwell | kac-constant
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    cutoff_level: Option<f64>,
    /// Comma-separated increasing levels (convergence-study, kernel-table).
    #[arg(long)]
    cutoff_levels: Option<String>,
    #[arg(long)]
    quad_nodes: Option<usize>,
    #[arg(long)]
    rmax: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// gaussian | mixture | bump
    #[arg(long)]
    datum: Option<String>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated snapshot times (t = 0 is always included).
    #[arg(long)]
    snapshots: Option<String>,
    /// fit | explicit
    #[arg(long)]
    envelope: Option<String>,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    k2: Option<f64>,
    /// power | sqrt-log
    #[arg(long)]
    psi: Option<String>,
    #[arg(long)]
    s: Option<f64>,
    /// auto or a number
    #[arg(long)]
    r0: Option<String>,
    #[arg(long)]
    accuracy: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the fourth-order integrator and report the sup difference.
    #[arg(long)]
    cross_check: bool,
}

impl CommonArgs {
    fn resolve(&self) -> wildsim::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let set = |cfg: &mut RunConfig, key: &str, v: Option<String>| -> wildsim::Result<()> {
            if let Some(v) = v {
                cfg.apply(key, &v)?;
            }
            Ok(())
        };
        set(&mut cfg, "mode", self.mode.clone())?;
        set(&mut cfg, "kernel", self.kernel.clone())?;
        set(&mut cfg, "gamma", self.gamma.map(|v| v.to_string()))?;
        set(&mut cfg, "cutoff-level", self.cutoff_level.map(|v| v.to_string()))?;
        set(&mut cfg, "cutoff-levels", self.cutoff_levels.clone())?;
        set(&mut cfg, "quad-nodes", self.quad_nodes.map(|v| v.to_string()))?;
        set(&mut cfg, "rmax", self.rmax.map(|v| v.to_string()))?;
        set(&mut cfg, "grid-points", self.grid_points.map(|v| v.to_string()))?;
        set(&mut cfg, "datum", self.datum.clone())?;
        set(&mut cfg, "t-final", self.t_final.map(|v| v.to_string()))?;
        set(&mut cfg, "snapshots", self.snapshots.clone())?;
        set(&mut cfg, "envelope", self.envelope.clone())?;
        set(&mut cfg, "k1", self.k1.map(|v| v.to_string()))?;
        set(&mut cfg, "k2", self.k2.map(|v| v.to_string()))?;
        set(&mut cfg, "psi", self.psi.clone())?;
        set(&mut cfg, "s", self.s.map(|v| v.to_string()))?;
        set(&mut cfg, "r0", self.r0.clone())?;
        set(&mut cfg, "accuracy", self.accuracy.map(|v| v.to_string()))?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if self.cross_check {
            cfg.cross_check = true;
        }
        Ok(cfg)
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => args.resolve().and_then(|cfg| {
            let out = run::cmd_simulate(&cfg)?;
            println!(
                "simulate: {} snapshots -> {}",
                out.snapshots.len(),
                out.snapshots_csv.display()
            );
            Ok(())
        }),
        Command::VerifyEnvelope(args) => args.resolve().and_then(|cfg| {
            let out = run::cmd_verify_envelope(&cfg)?;
            println!(
                "verify-envelope: PASS (K = {:.6}, R0 = {:.6}) -> {}",
                out.envelope.k,
                out.envelope.r0,
                out.certificate_json.display()
            );
            Ok(())
        }),
        Command::ConvergenceStudy(args) => args.resolve().and_then(|cfg| {
            let out = run::cmd_convergence_study(&cfg)?;
            for e in &out.entries {
                match e.sup_diff_prev {
                    Some(d) => println!("level {:>8}: sup diff from previous = {d:.6e}", e.level),
                    None => println!("level {:>8}: (base)", e.level),
                }
            }
            println!(
                "refinement doubling sup diff = {:.6e} -> {}",
                out.refinement_sup_diff,
                out.table_csv.display()
            );
            Ok(())
        }),
        Command::KernelTable(args) => args.resolve().and_then(|cfg| {
            let out = run::cmd_kernel_table(&cfg)?;
            println!("kernel-table -> {}", out.table_csv.display());
            Ok(())
        }),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
