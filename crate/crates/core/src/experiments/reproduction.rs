//! The full-size teacher–student run behind the loss, distance and
//! eigenvalue curves.

use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::sweep::{run_alpha_sweep, SweepSummary};
use crate::error::{Error, Result};
use crate::io::write_json;

/// Smallest initial NTK eigenvalue reported for the original full-size run.
pub const REFERENCE_LAMBDA_MIN_INIT: f64 = 0.01122;
/// Accepted order-of-magnitude window around it.
pub const LAMBDA_MIN_WINDOW: (f64, f64) = (3e-3, 4e-2);

/// Rough cost of a sweep in floating point operations and in seconds at an
/// assumed 1 GFLOP/s per core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub steps: u64,
    pub flops: f64,
    pub seconds_single_core: f64,
}

pub fn estimate_cost(cfg: &ExperimentConfig) -> CostEstimate {
    let cells = (cfg.alphas.len() * cfg.seeds) as u64;
    let steps = cells * cfg.sgld.num_steps() as u64;
    let (n, m, d) = (cfg.n_samples as f64, cfg.width as f64, cfg.input_dim as f64);
    // forward, pullback and noise products: about three n·m·d passes of 2 flops
    let per_step = 6.0 * n * m * d;
    let evals = if cfg.sgld.lambda_every == 0 {
        cells as f64
    } else {
        steps as f64 / cfg.sgld.lambda_every as f64 + cells as f64
    };
    let flops = steps as f64 * per_step + evals * 10.0 * n.powi(3);
    CostEstimate {
        steps,
        flops,
        seconds_single_core: flops / 1e9,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproductionReport {
    pub cost: CostEstimate,
    pub reference_lambda_min_init: f64,
    pub lambda_min_init: Vec<f64>,
    pub lambda_min_in_window: bool,
    /// Final training error and distance at the smallest and largest α, per seed.
    pub final_gap_small_alpha: Vec<Option<f64>>,
    pub final_gap_large_alpha: Vec<Option<f64>>,
    pub final_dist_small_alpha: Vec<Option<f64>>,
    pub final_dist_large_alpha: Vec<Option<f64>>,
    pub large_alpha_lower_loss_every_seed: bool,
    pub large_alpha_closer_every_seed: bool,
}

/// Runs the sweep of `cfg` (normally [`ExperimentConfig::full_scale`]) and
/// writes `reproduction.json` next to the sweep artifacts. Refuses without
/// `acknowledge_budget`, reporting the estimated cost.
pub fn reproduce_full_scale(cfg: &ExperimentConfig, acknowledge_budget: bool, out: &Path) -> Result<(SweepSummary, ReproductionReport)> {
    let cost = estimate_cost(cfg);
    if !acknowledge_budget {
        return Err(Error::Budget(format!(
            "{} Euler-Maruyama steps, about {:.1e} flops (~{:.1} core-hours); pass the budget flag to proceed",
            cost.steps,
            cost.flops,
            cost.seconds_single_core / 3600.0
        )));
    }
    cfg.validate()?;
    let summary = run_alpha_sweep(cfg, out)?;
    let lo = cfg.alphas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = cfg.alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let column = |alpha: f64, f: &dyn Fn(&super::sweep::CellSummary) -> Option<f64>| -> Vec<Option<f64>> {
        summary.cells.iter().filter(|c| c.alpha == alpha).map(f).collect()
    };
    let lambda: Vec<f64> = summary.cells.iter().filter(|c| c.alpha == lo).map(|c| c.lambda_min_init).collect();
    let gs = column(lo, &|c| c.final_gap);
    let gl = column(hi, &|c| c.final_gap);
    let ds = column(lo, &|c| c.final_dist);
    let dl = column(hi, &|c| c.final_dist);
    let pairwise_less = |a: &[Option<f64>], b: &[Option<f64>]| {
        a.iter().zip(b).all(|(x, y)| matches!((x, y), (Some(x), Some(y)) if x < y))
    };
    let report = ReproductionReport {
        cost,
        reference_lambda_min_init: REFERENCE_LAMBDA_MIN_INIT,
        lambda_min_in_window: lambda.iter().all(|&l| (LAMBDA_MIN_WINDOW.0..=LAMBDA_MIN_WINDOW.1).contains(&l)),
        lambda_min_init: lambda,
        large_alpha_lower_loss_every_seed: pairwise_less(&gl, &gs),
        large_alpha_closer_every_seed: pairwise_less(&dl, &ds),
        final_gap_small_alpha: gs,
        final_gap_large_alpha: gl,
        final_dist_small_alpha: ds,
        final_dist_large_alpha: dl,
    };
    write_json(&out.join("reproduction.json"), &report)?;
    Ok((summary, report))
}
