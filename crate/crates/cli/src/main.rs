//! `sgld-lab`: run lazy-regime SGLD experiments from a flat config file.

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use lazy_sgld::experiments::{
    dataset_csv, exit_probability, prepare, reproduce_full_scale, run_alpha_sweep, simulate, verify,
    CellStatus, ExperimentConfig,
};
use lazy_sgld::io::atomic_write;
use lazy_sgld::Error;

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "sgld-lab", version, about = "Stochastic gradient Langevin dynamics in the lazy training regime")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file applied over the preset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override one config key; repeatable, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<NonZeroUsize>,
    /// Confirm that a long full-scale run is intended.
    #[arg(long, global = true)]
    ack_budget: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// One trajectory at `alpha` from the seed-0 student.
    Simulate,
    /// Every (alpha, seed) cell of the grid, with summary and figure tables.
    Sweep,
    /// Monte Carlo exit frequencies per alpha from a fixed initialization.
    ExitProb,
    /// Check the regularity assumptions; exit 1 if any fails.
    Verify,
    /// Write the training set (and held-out set) as CSV.
    GenData,
    /// The full-size sweep (d=16, m=600, n=800); needs --ack-budget.
    #[command(name = "reproduce-section4", visible_alias = "full-scale")]
    ReproduceFullScale,
}

enum Failure {
    Config(String),
    Divergence(String),
    Violation(String),
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Budget(_) | Error::Capacity { .. } => Failure::Config(e.to_string()),
            Error::Divergence { .. } => Failure::Divergence(e.to_string()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match cli.command {
        Command::ReproduceFullScale => ExperimentConfig::full_scale(),
        _ => ExperimentConfig::desk(),
    };
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for kv in &cli.overrides {
        cfg.apply_override(kv)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_config(cfg: &ExperimentConfig, out: &Path) -> Result<(), Failure> {
    atomic_write(&out.join("config.txt"), cfg.to_text().as_bytes())?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.get())
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Simulate => {
            let s = simulate(&cfg, out)?;
            write_config(&cfg, out)?;
            println!(
                "alpha {} final gap {:.6e} dist {:.6e} exited {} (tau {:?})",
                s.alpha, s.final_gap, s.final_dist, s.exited, s.tau
            );
        }
        Command::Sweep => {
            let s = run_alpha_sweep(&cfg, out)?;
            write_config(&cfg, out)?;
            for a in &s.per_alpha {
                println!(
                    "alpha {:>8} final mean gap {:.6e} exit frequency {:.3} diverged {}",
                    a.alpha,
                    a.gap.mean.last().copied().unwrap_or(f64::NAN),
                    a.exit_frequency,
                    a.diverged
                );
            }
            let diverged: Vec<String> = s
                .cells
                .iter()
                .filter_map(|c| match c.status {
                    CellStatus::Diverged { step } => Some(format!("alpha {} seed {} at step {step}", c.alpha, c.seed)),
                    CellStatus::Ok => None,
                })
                .collect();
            if !diverged.is_empty() {
                return Err(Failure::Divergence(format!("diverged cells: {}", diverged.join("; "))));
            }
        }
        Command::ExitProb => {
            let r = exit_probability(&cfg, out)?;
            write_config(&cfg, out)?;
            for e in &r.estimates {
                println!(
                    "alpha {:>8} exits {}/{} frequency {:.3} [{:.3}, {:.3}] diverged {}",
                    e.alpha,
                    e.exits,
                    e.trials - e.diverged,
                    e.frequency,
                    e.ci_low,
                    e.ci_high,
                    e.diverged
                );
            }
            println!("nonincreasing in alpha: {}; bounds hold: {}", r.nonincreasing, r.bounds_hold);
        }
        Command::Verify => {
            let v = verify(&cfg, out)?;
            write_config(&cfg, out)?;
            for e in &v.report.entries {
                println!("{:<28} {:<5} witness {:.6e} bound {:.6e}", e.id, e.holds, e.witness, e.analytic_bound);
            }
            for e in &v.eta_checks {
                println!("eta at alpha {:>8}: {:<5} eta {:e} max {:.6e}", e.alpha, e.admissible, e.eta, e.eta_max);
            }
            if !v.holds {
                return Err(Failure::Violation("at least one assumption check failed".into()));
            }
        }
        Command::GenData => {
            let problem = prepare(&cfg)?;
            atomic_write(&out.join("dataset.csv"), dataset_csv(&problem.data.train).as_bytes())?;
            if let Some(h) = &problem.heldout {
                atomic_write(&out.join("heldout.csv"), dataset_csv(h).as_bytes())?;
            }
            write_config(&cfg, out)?;
            println!("{} samples, fingerprint {:016x}", problem.data.train.len(), problem.data.train.fingerprint());
        }
        Command::ReproduceFullScale => {
            let (_, r) = reproduce_full_scale(&cfg, cli.ack_budget, out)?;
            write_config(&cfg, out)?;
            println!(
                "initial lambda_min {:?} (window ok: {}); large alpha lower loss on every seed: {}",
                r.lambda_min_init, r.lambda_min_in_window, r.large_alpha_lower_loss_every_seed
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let help = format!(
        "Config keys (defaults of the desk preset; reproduce-section4 starts from the full-size preset):\n{}",
        ExperimentConfig::desk().describe()
    );
    let matches = Cli::command().after_long_help(help.clone()).after_help(help).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("sgld-lab: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Divergence(msg)) => {
            eprintln!("sgld-lab: {msg}");
            ExitCode::from(EXIT_DIVERGENCE)
        }
        Err(Failure::Violation(msg)) => {
            eprintln!("sgld-lab: {msg}");
            ExitCode::from(EXIT_VIOLATION)
        }
        Err(Failure::Other(e)) => {
            eprintln!("sgld-lab: {e:#}");
            ExitCode::from(EXIT_VIOLATION)
        }
    }
}
