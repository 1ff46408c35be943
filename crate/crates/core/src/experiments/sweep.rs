//! Single runs and α sweeps over the teacher–student problem.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::student::{analyze_init, build_student, InitSummary, Student};
use super::teacher::{generate_teacher_student, TeacherStudent};
use crate::assumptions::{check_eta, EtaCheck};
use crate::data::Dataset;
use crate::diagnostics::stats::{quantile, wilson_interval, MeanEstimate, Z95};
use crate::diagnostics::{evaluate_all, layer_radius, reference_decay, BoundReport, DeepExitState, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::io::{atomic_write, fmt_f64, write_json};
use crate::model::ParamVector;
use crate::sgld::{run_trajectory, MartingaleState, RunOptions, Trajectory};

/// Training data plus optional held-out samples from the same teacher.
pub struct Problem {
    pub data: TeacherStudent,
    pub heldout: Option<Dataset>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.validate()?;
    let data = generate_teacher_student(&cfg.teacher())?;
    let heldout = match cfg.heldout_n {
        0 => None,
        k => Some(data.heldout(k)?),
    };
    Ok(Problem { data, heldout })
}

/// `‖αh(ω) − y‖²/n` on held-out samples.
pub fn heldout_error(student: &Student, params: &ParamVector, alpha: f64, heldout: &Dataset) -> Result<f64> {
    let h = student.model.predict(params, heldout)?;
    let y = heldout.targets();
    Ok(h.iter().zip(y.iter()).map(|(h, y)| (alpha * h - y).powi(2)).sum::<f64>() / y.len() as f64)
}

pub(crate) fn run_options<'a>(cfg: &ExperimentConfig, student: &Student, init: &InitSummary) -> RunOptions<'a> {
    RunOptions {
        radius: init.radius,
        stop_at_exit: cfg.stop_at_exit,
        layer_radius: match student.deep_width {
            Some(m) if cfg.layer_radius > 0.0 => Some(layer_radius(m, cfg.layer_radius)),
            _ => None,
        },
        ..Default::default()
    }
}

/// Curvature admissibility of the configured η at `alpha`; shallow only.
pub fn eta_check(cfg: &ExperimentConfig, student: &Student, data: &Dataset, alpha: f64) -> Result<Option<EtaCheck>> {
    match student.curvature_bound(alpha, data)? {
        Some(bound) => Ok(Some(check_eta(alpha, bound, cfg.sgld.eta_alpha)?)),
        None => Ok(None),
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Plain decimal for ordinary values, exponent form when that gets long.
fn alpha_label(alpha: f64) -> String {
    let plain = format!("{alpha}");
    if plain.len() <= 12 {
        plain
    } else {
        format!("{alpha:e}")
    }
}

pub fn trajectory_file_name(alpha: f64, seed: usize) -> String {
    format!("traj_alpha{}_seed{seed}.csv", alpha_label(alpha))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub config: String,
    pub alpha: f64,
    pub seed: u64,
    pub init: InitSummary,
    pub gap0: f64,
    pub eta: Option<EtaCheck>,
    /// Every bound at the horizon; shallow students only.
    pub bounds: Option<BoundReport>,
    pub exited: bool,
    pub tau: Option<f64>,
    pub final_gap: f64,
    pub final_dist: f64,
    pub martingale: MartingaleState,
    pub martingale_stopped_at: Option<f64>,
    pub ntk_checks: usize,
    pub ntk_violations: usize,
    pub deep_exit: Option<DeepExitState>,
    pub heldout_error: Option<f64>,
    pub steps: usize,
}

/// One trajectory at `cfg.sgld.alpha` from the seed-0 student. Writes
/// `trajectory.csv` and `summary.json` into `out`.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateSummary> {
    let problem = prepare(cfg)?;
    let data = &problem.data.train;
    let student = build_student(cfg, 0)?;
    let init = analyze_init(&student, data)?;
    let sgld = cfg.sgld.clone();
    let tr = run_trajectory(&*student.model, &student.origin, data, &sgld, run_options(cfg, &student, &init))?;
    let heldout = match &problem.heldout {
        Some(h) => Some(heldout_error(&student, &tr.final_params, sgld.alpha, h)?),
        None => None,
    };
    let summary = SimulateSummary {
        config: cfg.to_text(),
        alpha: sgld.alpha,
        seed: sgld.seed,
        gap0: init.gap0(sgld.alpha, data),
        eta: eta_check(cfg, &student, data, sgld.alpha)?,
        bounds: init.bound_inputs(sgld.alpha, data).map(|b| evaluate_all(&b, sgld.horizon)),
        init,
        exited: tr.record.exited,
        tau: finite_or_none(tr.record.tau),
        final_gap: tr.record.final_gap().unwrap_or(f64::NAN),
        final_dist: tr.record.final_dist().unwrap_or(f64::NAN),
        martingale: tr.martingale,
        martingale_stopped_at: tr.martingale_stopped_at,
        ntk_checks: tr.ntk_checks,
        ntk_violations: tr.ntk_violations,
        deep_exit: tr.deep_exit.clone(),
        heldout_error: heldout,
        steps: tr.steps,
    };
    tr.record.write_csv(&out.join("trajectory.csv"))?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Diverged { step: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub alpha: f64,
    pub seed: usize,
    #[serde(flatten)]
    pub status: CellStatus,
    /// CSV file name inside the output directory; absent after divergence.
    pub csv: Option<String>,
    pub lambda_min_init: f64,
    pub gap0: f64,
    pub tau: Option<f64>,
    pub final_gap: Option<f64>,
    pub final_dist: Option<f64>,
    pub final_martingale: Option<f64>,
    pub heldout_error: Option<f64>,
    pub ntk_checks: usize,
    pub ntk_violations: usize,
}

/// Per-row mean, 95% half-width and contributing count across seeds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CurveStats {
    pub mean: Vec<f64>,
    pub ci_half_width: Vec<f64>,
    pub count: Vec<usize>,
}

impl CurveStats {
    /// Folds column `col` of every record row by row; rows missing from a
    /// record (early stop) and non-finite entries are skipped.
    fn fold(records: &[&TrajectoryRecord], rows: usize, col: impl Fn(&TrajectoryRecord) -> &[f64]) -> Self {
        let mut out = CurveStats::default();
        for k in 0..rows {
            let xs: Vec<f64> = records
                .iter()
                .filter_map(|r| col(r).get(k).copied())
                .filter(|v| v.is_finite())
                .collect();
            let est = MeanEstimate::from_samples(&xs);
            out.mean.push(est.mean);
            out.ci_half_width.push(if xs.len() < 2 { f64::NAN } else { est.half_width() });
            out.count.push(xs.len());
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlphaSummary {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub gap: CurveStats,
    pub dist: CurveStats,
    pub lambda_min: CurveStats,
    pub exit_frequency: f64,
    pub exit_ci: (f64, f64),
    /// 10/50/90% quantiles of the finite exit times.
    pub tau_quantiles: [f64; 3],
    pub diverged: usize,
    pub lambda_min_init_mean: f64,
    pub heldout_error_mean: Option<f64>,
    /// Bounds at the horizon for the seed-0 initialization.
    pub bounds: Option<BoundReport>,
    pub eta: Option<EtaCheck>,
}

/// Reference decay `gap0 · exp(−λ t)`, `λ` the initial smallest Gram
/// eigenvalue averaged over seeds.
#[derive(Debug, Clone, Serialize)]
pub struct ReferenceCurve {
    pub lambda_min_init: f64,
    pub gap0: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub config: String,
    pub dataset_fingerprint: u64,
    pub n_samples: usize,
    pub horizon: f64,
    pub alphas: Vec<f64>,
    pub seeds: usize,
    /// The body of the table is training error; `heldout_error_mean` holds
    /// the error on fresh teacher samples when enabled.
    pub error_kind: &'static str,
    pub reference: ReferenceCurve,
    pub per_alpha: Vec<AlphaSummary>,
    pub cells: Vec<CellSummary>,
}

struct CellRun {
    summary: CellSummary,
    record: Option<TrajectoryRecord>,
}

fn run_cell(cfg: &ExperimentConfig, problem: &Problem, alpha: f64, s: usize, out: &Path) -> Result<CellRun> {
    let data = &problem.data.train;
    let student = build_student(cfg, s as u64)?;
    let init = analyze_init(&student, data)?;
    let sgld = cfg.cell_sgld(alpha, s as u64);
    let gap0 = init.gap0(alpha, data);
    let base = CellSummary {
        alpha,
        seed: s,
        status: CellStatus::Ok,
        csv: None,
        lambda_min_init: init.gram_min_eig,
        gap0,
        tau: None,
        final_gap: None,
        final_dist: None,
        final_martingale: None,
        heldout_error: None,
        ntk_checks: 0,
        ntk_violations: 0,
    };
    let tr: Trajectory = match run_trajectory(&*student.model, &student.origin, data, &sgld, run_options(cfg, &student, &init)) {
        Ok(tr) => tr,
        Err(Error::Divergence { step }) => {
            return Ok(CellRun {
                summary: CellSummary { status: CellStatus::Diverged { step }, ..base },
                record: None,
            })
        }
        Err(e) => return Err(e),
    };
    let name = trajectory_file_name(alpha, s);
    tr.record.write_csv(&out.join(&name))?;
    let heldout = match &problem.heldout {
        Some(h) => Some(heldout_error(&student, &tr.final_params, alpha, h)?),
        None => None,
    };
    Ok(CellRun {
        summary: CellSummary {
            csv: Some(name),
            tau: finite_or_none(tr.record.tau),
            final_gap: tr.record.final_gap(),
            final_dist: tr.record.final_dist(),
            final_martingale: tr.record.martingale_e.last().copied(),
            heldout_error: heldout,
            ntk_checks: tr.ntk_checks,
            ntk_violations: tr.ntk_violations,
            ..base
        },
        record: Some(tr.record),
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    MeanEstimate::from_samples(&xs.collect::<Vec<_>>()).mean
}

/// Runs every (α, seed) cell in parallel, writes one CSV per finished cell,
/// `summary.json` and the three figure tables into `out`.
///
/// Cells are independent and merged in grid order, so the artifacts do not
/// depend on the thread count. Diverged cells are recorded, not fatal.
pub fn run_alpha_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary> {
    let problem = prepare(cfg)?;
    let data = &problem.data.train;
    let grid: Vec<(f64, usize)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| (0..cfg.seeds).map(move |s| (a, s)))
        .collect();
    let runs: Vec<CellRun> = grid
        .par_iter()
        .map(|&(a, s)| run_cell(cfg, &problem, a, s, out))
        .collect::<Result<_>>()?;

    let seed0 = build_student(cfg, 0)?;
    let init0 = analyze_init(&seed0, data)?;
    let longest = runs
        .iter()
        .filter_map(|r| r.record.as_ref())
        .max_by_key(|r| r.len())
        .map(|r| r.times.clone())
        .unwrap_or_default();

    let mut per_alpha = Vec::new();
    for &alpha in &cfg.alphas {
        let cells: Vec<&CellRun> = runs.iter().filter(|r| r.summary.alpha == alpha).collect();
        let records: Vec<&TrajectoryRecord> = cells.iter().filter_map(|c| c.record.as_ref()).collect();
        let rows = records.iter().map(|r| r.len()).max().unwrap_or(0);
        let exits = records.iter().filter(|r| r.exited).count();
        let taus: Vec<f64> = records.iter().map(|r| r.tau).filter(|t| t.is_finite()).collect();
        let held: Vec<f64> = cells.iter().filter_map(|c| c.summary.heldout_error).collect();
        per_alpha.push(AlphaSummary {
            alpha,
            times: longest[..rows.min(longest.len())].to_vec(),
            gap: CurveStats::fold(&records, rows, |r| &r.gap),
            dist: CurveStats::fold(&records, rows, |r| &r.dist),
            lambda_min: CurveStats::fold(&records, rows, |r| &r.lambda_min),
            exit_frequency: if records.is_empty() { f64::NAN } else { exits as f64 / records.len() as f64 },
            exit_ci: wilson_interval(exits, records.len(), Z95),
            tau_quantiles: [quantile(&taus, 0.1), quantile(&taus, 0.5), quantile(&taus, 0.9)],
            diverged: cells.len() - records.len(),
            lambda_min_init_mean: mean(cells.iter().map(|c| c.summary.lambda_min_init)),
            heldout_error_mean: (!held.is_empty()).then(|| mean(held.iter().copied())),
            bounds: init0.bound_inputs(alpha, data).map(|b| evaluate_all(&b, cfg.sgld.horizon)),
            eta: eta_check(cfg, &seed0, data, alpha)?,
        });
    }

    let first = cfg.alphas[0];
    let lambda_ref = mean(runs.iter().filter(|r| r.summary.alpha == first).map(|r| r.summary.lambda_min_init));
    let gap0_ref = mean(runs.iter().filter(|r| r.summary.alpha == first).map(|r| r.summary.gap0));
    let reference = ReferenceCurve {
        lambda_min_init: lambda_ref,
        gap0: gap0_ref,
        values: longest.iter().map(|&t| reference_decay(gap0_ref, lambda_ref, t)).collect(),
        times: longest.clone(),
    };

    let summary = SweepSummary {
        config: cfg.to_text(),
        dataset_fingerprint: data.fingerprint(),
        n_samples: data.len(),
        horizon: cfg.sgld.horizon,
        alphas: cfg.alphas.clone(),
        seeds: cfg.seeds,
        error_kind: "training",
        reference,
        per_alpha,
        cells: runs.into_iter().map(|r| r.summary).collect(),
    };
    write_figure_tables(&summary, out)?;
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn table(times: &[f64], columns: &[(String, Vec<f64>)], keep: impl Fn(usize) -> bool) -> String {
    let mut text = String::from("t");
    for (name, _) in columns {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for (k, t) in times.iter().enumerate() {
        if !keep(k) {
            continue;
        }
        text.push_str(&fmt_f64(*t));
        for (_, col) in columns {
            text.push(',');
            text.push_str(&fmt_f64(col.get(k).copied().unwrap_or(f64::NAN)));
        }
        text.push('\n');
    }
    text
}

/// `fig_loss.csv` (one column per α plus the reference), `fig_distance.csv`
/// and `fig_lambda_min.csv` (rows where some eigenvalue was evaluated).
pub fn write_figure_tables(summary: &SweepSummary, out: &Path) -> Result<()> {
    let times = &summary.reference.times;
    let cols = |f: &dyn Fn(&AlphaSummary) -> &CurveStats| -> Vec<(String, Vec<f64>)> {
        summary
            .per_alpha
            .iter()
            .map(|a| (format!("alpha_{}", alpha_label(a.alpha)), f(a).mean.clone()))
            .collect()
    };
    let mut loss = cols(&|a| &a.gap);
    loss.push(("reference".into(), summary.reference.values.clone()));
    atomic_write(&out.join("fig_loss.csv"), table(times, &loss, |_| true).as_bytes())?;
    let dist = cols(&|a| &a.dist);
    atomic_write(&out.join("fig_distance.csv"), table(times, &dist, |_| true).as_bytes())?;
    let lam = cols(&|a| &a.lambda_min);
    let any_finite = |k: usize| lam.iter().any(|(_, c)| c.get(k).is_some_and(|v| v.is_finite()));
    atomic_write(&out.join("fig_lambda_min.csv"), table(times, &lam, any_finite).as_bytes())?;
    Ok(())
}
