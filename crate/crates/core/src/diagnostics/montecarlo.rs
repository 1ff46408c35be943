//! Ensemble estimators: exit frequencies across an α grid and the split of
//! the mean gap into exiting and non-exiting cohorts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{log_log_slope, quantile, wilson_interval, Z95};
use crate::error::{Error, Result};

/// Outcome of one Monte Carlo trajectory as seen by the exit estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrialOutcome {
    /// First-exit time, `+∞` if the ball was never left within the horizon.
    Finished { tau: f64 },
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEstimate {
    pub alpha: f64,
    pub trials: usize,
    pub exits: usize,
    /// Aborted by divergence; excluded from `frequency` and counted here.
    pub diverged: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// 10/50/90% quantiles of the finite exit times (NaN when none exited).
    pub tau_quantiles: [f64; 3],
}

/// Estimates `P(τ ≤ horizon)` for each α with a Wilson 95% interval.
///
/// `run(alpha, trial)` executes one trajectory; trials fan out over the
/// current rayon pool and are folded in trial order, so the estimate does not
/// depend on scheduling.
pub fn exit_probability_mc<F>(alphas: &[f64], trials: usize, horizon: f64, run: F) -> Result<Vec<ExitEstimate>>
where
    F: Fn(f64, u64) -> Result<TrialOutcome> + Sync,
{
    if trials < 30 {
        return Err(Error::InvalidArgument(format!("exit Monte Carlo needs at least 30 trials, got {trials}")));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let outcomes: Vec<Result<TrialOutcome>> =
                (0..trials as u64).into_par_iter().map(|k| run(alpha, k)).collect();
            let mut taus = Vec::new();
            let mut diverged = 0;
            let mut finished = 0;
            for o in outcomes {
                match o? {
                    TrialOutcome::Finished { tau } => {
                        finished += 1;
                        if tau <= horizon {
                            taus.push(tau);
                        }
                    }
                    TrialOutcome::Diverged => diverged += 1,
                }
            }
            let exits = taus.len();
            let (ci_low, ci_high) = wilson_interval(exits, finished, Z95);
            Ok(ExitEstimate {
                alpha,
                trials,
                exits,
                diverged,
                frequency: if finished == 0 { f64::NAN } else { exits as f64 / finished as f64 },
                ci_low,
                ci_high,
                tau_quantiles: [quantile(&taus, 0.1), quantile(&taus, 0.5), quantile(&taus, 0.9)],
            })
        })
        .collect()
}

/// Whether frequencies, ordered by increasing α, never increase beyond what
/// the confidence intervals allow: each step either does not increase or the
/// two intervals overlap.
pub fn nonincreasing_within_ci(estimates: &[ExitEstimate]) -> bool {
    let mut sorted: Vec<&ExitEstimate> = estimates.iter().collect();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    sorted.windows(2).all(|w| w[1].frequency <= w[0].frequency || w[1].ci_low <= w[0].ci_high)
}

/// Per-α split of `E[R̄_t]` into the non-exiting and exiting cohorts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub alpha: f64,
    pub trajectories: usize,
    /// `mean(R̄_t · 1{τ = ∞})`.
    pub stayed: f64,
    /// `mean(R̄_t · 1{τ < ∞})`.
    pub exited: f64,
    pub stayed_empty: bool,
    pub exited_empty: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortDecomposition {
    pub splits: Vec<CohortSplit>,
    /// Log-log slope of the exiting contribution against α; `None` when fewer
    /// than two α values have a positive contribution.
    pub exited_slope: Option<f64>,
}

impl CohortDecomposition {
    /// True when the exiting contribution does not grow with α: a
    /// nonpositive fitted slope, or too few nonzero terms to fit one (all
    /// exiting contributions vanish beyond the first).
    pub fn exited_nonincreasing(&self) -> bool {
        match self.exited_slope {
            Some(s) => s <= 0.0,
            None => {
                let mut v: Vec<&CohortSplit> = self.splits.iter().collect();
                v.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
                v.windows(2).all(|w| w[1].exited <= w[0].exited)
            }
        }
    }
}

/// `ensembles[j] = (alpha, [(gap at t, exited)])`.
pub fn cohort_decomposition(ensembles: &[(f64, Vec<(f64, bool)>)]) -> CohortDecomposition {
    let splits: Vec<CohortSplit> = ensembles
        .iter()
        .map(|(alpha, traj)| {
            let n = traj.len().max(1) as f64;
            let stayed: f64 = traj.iter().filter(|(_, e)| !e).map(|(g, _)| g).sum::<f64>() / n;
            let exited: f64 = traj.iter().filter(|(_, e)| *e).map(|(g, _)| g).sum::<f64>() / n;
            CohortSplit {
                alpha: *alpha,
                trajectories: traj.len(),
                stayed,
                exited,
                stayed_empty: !traj.iter().any(|(_, e)| !e),
                exited_empty: !traj.iter().any(|(_, e)| *e),
            }
        })
        .collect();
    let xs: Vec<f64> = splits.iter().map(|s| s.alpha).collect();
    let ys: Vec<f64> = splits.iter().map(|s| s.exited).collect();
    CohortDecomposition {
        exited_slope: log_log_slope(&xs, &ys),
        splits,
    }
}
