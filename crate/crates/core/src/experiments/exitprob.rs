//! Monte Carlo exit frequencies from a fixed initialization.

use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::student::{analyze_init, build_student, InitSummary};
use super::sweep::prepare;
use crate::diagnostics::{
    evaluate_all, exit_probability_mc, nonincreasing_within_ci, BoundEntry, ExitEstimate, TrialOutcome,
};
use crate::error::{Error, Result};
use crate::io::write_json;
use crate::sgld::{run_trajectory, RunOptions, SgldConfig};

#[derive(Debug, Clone, Serialize)]
pub struct ExitReport {
    pub config: String,
    pub horizon: f64,
    pub init: InitSummary,
    pub estimates: Vec<ExitEstimate>,
    /// Frequencies do not increase with α beyond CI overlap.
    pub nonincreasing: bool,
    /// Exit-probability bound per α and convention, checked against the
    /// lower end of the frequency interval wherever it is below one.
    pub bounds: Vec<BoundEntry>,
    pub bounds_hold: bool,
}

/// `cfg.trials` trajectories per α from the seed-0 student, trial `k` on
/// noise stream `seed + k`; each stops at its first exit. Writes
/// `exit_probability.json` into `out`.
pub fn exit_probability(cfg: &ExperimentConfig, out: &Path) -> Result<ExitReport> {
    let problem = prepare(cfg)?;
    let data = &problem.data.train;
    let student = build_student(cfg, 0)?;
    let init = analyze_init(&student, data)?;
    let radius = init
        .radius
        .ok_or_else(|| Error::Config("exit estimation needs a shallow student with a positive NTK".into()))?;
    let base = SgldConfig {
        record_every: 1,
        lambda_every: 0,
        ..cfg.sgld.clone()
    };
    let run = |alpha: f64, k: u64| -> Result<TrialOutcome> {
        let sgld = SgldConfig { alpha, ..base.for_trial(k) };
        let opts = RunOptions {
            radius: Some(radius),
            stop_at_exit: true,
            track_martingale: false,
            ..Default::default()
        };
        match run_trajectory(&*student.model, &student.origin, data, &sgld, opts) {
            Ok(tr) => Ok(TrialOutcome::Finished { tau: tr.record.tau }),
            Err(Error::Divergence { .. }) => Ok(TrialOutcome::Diverged),
            Err(e) => Err(e),
        }
    };
    let estimates = exit_probability_mc(&cfg.alphas, cfg.trials, base.horizon, run)?;

    let mut bounds = Vec::new();
    for est in &estimates {
        let inputs = init.bound_inputs(est.alpha, data).expect("radius implies a closed-form Lipschitz constant");
        for e in evaluate_all(&inputs, base.horizon).entries {
            if e.name != "exit_probability" {
                continue;
            }
            let e = e.input("ci_low", est.ci_low);
            bounds.push(if e.vacuous { e } else { e.observe_upper(est.ci_low, 1.0) });
        }
    }
    let report = ExitReport {
        config: cfg.to_text(),
        horizon: base.horizon,
        nonincreasing: nonincreasing_within_ci(&estimates),
        bounds_hold: bounds.iter().all(|b| b.satisfied != Some(false)),
        init,
        estimates,
        bounds,
    };
    write_json(&out.join("exit_probability.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::sweep::tests::tiny;

    #[test]
    fn small_exit_study() {
        let mut c = tiny();
        c.apply_text("trials = 30\nalphas = 0.05, 50\nhorizon = 0.3\n").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let r = exit_probability(&c, dir.path()).unwrap();
        assert_eq!(r.estimates.len(), 2);
        assert_eq!(r.bounds.len(), 8);
        assert!(r.estimates[0].frequency >= r.estimates[1].frequency);
        assert_eq!(r.estimates[1].exits, 0);
        assert!(dir.path().join("exit_probability.json").exists());
        let again = tempfile::tempdir().unwrap();
        exit_probability(&c, again.path()).unwrap();
        assert_eq!(
            std::fs::read(dir.path().join("exit_probability.json")).unwrap(),
            std::fs::read(again.path().join("exit_probability.json")).unwrap()
        );
    }
}
