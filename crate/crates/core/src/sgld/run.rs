use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use super::config::{NoiseMode, SgldConfig};
use super::martingale::{advance_martingale, MartingaleState};
use super::noise::draw_standard;
use super::step::{finite_step, StepEval};
use crate::data::Dataset;
use crate::diagnostics::{detect_exit_deep, DeepExitState, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LinearizedPredictor, ParamVector, Predictor};
use crate::ntk::LazyRadius;

/// What a trajectory run tracks beyond the mandatory record columns.
#[derive(Clone, Copy)]
pub struct RunOptions<'a> {
    /// Lazy ball for exit detection and the in-ball NTK check.
    pub radius: Option<LazyRadius>,
    /// Stop at the first recorded exit.
    pub stop_at_exit: bool,
    pub track_martingale: bool,
    /// Linearized model driven by the same increments.
    pub twin: Option<&'a LinearizedPredictor>,
    /// Per-layer ball radius for layered models.
    pub layer_radius: Option<f64>,
}

impl Default for RunOptions<'_> {
    fn default() -> Self {
        Self {
            radius: None,
            stop_at_exit: false,
            track_martingale: true,
            twin: None,
            layer_radius: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub record: TrajectoryRecord,
    pub final_params: ParamVector,
    pub martingale: MartingaleState,
    /// Time at which the gap hit zero and martingale tracking stopped.
    pub martingale_stopped_at: Option<f64>,
    /// `‖αh̄ − αh‖` on the record grid; empty without a twin.
    pub twin_output_gap: Vec<f64>,
    /// In-ball NTK evaluations and how many fell below `(λ − Lip·dist)²`.
    pub ntk_checks: usize,
    pub ntk_violations: usize,
    pub deep_exit: Option<DeepExitState>,
    pub steps: usize,
}

/// Runs one Euler–Maruyama trajectory from `origin` for `config.horizon`.
///
/// The ChaCha8 stream is seeded with `config.seed`; identical inputs give
/// bitwise-identical output.
pub fn run_trajectory(
    model: &dyn Predictor,
    origin: &ParamVector,
    data: &Dataset,
    config: &SgldConfig,
    options: RunOptions<'_>,
) -> Result<Trajectory> {
    config.validate_for(origin.len())?;
    let p = origin.len();
    let n = data.len();
    let steps = config.num_steps();
    let blocks = options.layer_radius.and(model.layer_blocks());
    let mut layer_series: Vec<(usize, Vec<f64>)> = blocks
        .iter()
        .flatten()
        .map(|b| (b.layer, Vec::new()))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut w = origin.clone();
    let mut twin_w = origin.clone();
    let mut record = TrajectoryRecord::new();
    let mut mart = MartingaleState::default();
    let mut mart_stopped = None;
    let mut twin_gap = Vec::new();
    let (mut ntk_checks, mut ntk_violations) = (0, 0);
    let mut taken = 0;

    for k in 0..=steps {
        let t = k as f64 * config.dt;
        let eval = StepEval::new(model, &w, data, config)?;
        if !eval.gap.is_finite() {
            return Err(Error::Divergence { step: k });
        }
        let twin_eval = match options.twin {
            Some(lin) => Some(StepEval::new(lin, &twin_w, data, config)?),
            None => None,
        };

        if k % config.record_every == 0 || k == steps {
            let dist = w.distance(origin);
            let want_lambda = k == 0 || (config.lambda_every > 0 && k % config.lambda_every == 0);
            let lambda_min = if want_lambda {
                linalg::min_symmetric_eigenvalue(&eval.local.gram())
            } else {
                f64::NAN
            };
            record.push(t, eval.gap, dist, lambda_min, mart.e);
            if let Some(tw) = &twin_eval {
                twin_gap.push((&tw.scaled_outputs - &eval.scaled_outputs).norm());
            }
            if let Some(bl) = &blocks {
                for (b, (_, series)) in bl.iter().zip(layer_series.iter_mut()) {
                    let delta = w.rows(b.range.start, b.range.len()) - origin.rows(b.range.start, b.range.len());
                    series.push(delta.norm());
                }
            }
            if let Some(radius) = options.radius {
                if dist <= radius.r && want_lambda {
                    ntk_checks += 1;
                    let floor = (radius.lambda - radius.lip_dh * dist).powi(2);
                    if lambda_min < floor * (1.0 - 1e-9) - 1e-12 {
                        ntk_violations += 1;
                    }
                }
                if dist > radius.r {
                    record.mark_exit(t);
                    if options.stop_at_exit {
                        break;
                    }
                }
            }
        }
        if k == steps {
            break;
        }

        let xi = draw_standard(config.noise_mode, n, p, &mut rng);
        if options.track_martingale && mart_stopped.is_none() && config.noise_mode != NoiseMode::None {
            match eval.martingale_integrand(config) {
                Ok(a) => {
                    let dw = &xi * config.dt.sqrt();
                    mart = advance_martingale(mart, &a, &dw, config.dt)?;
                }
                Err(Error::GapDegenerate { .. }) => mart_stopped = Some(t),
                Err(e) => return Err(e),
            }
        }
        w = finite_step(&w, &eval.em_increment(config, &xi), k + 1)?;
        if let Some(tw) = &twin_eval {
            twin_w = finite_step(&twin_w, &tw.em_increment(config, &xi), k + 1)?;
        }
        taken = k + 1;
    }

    let deep_exit = match options.layer_radius {
        Some(r) if !layer_series.is_empty() => Some(detect_exit_deep(&record.times, &layer_series, r)?),
        _ => None,
    };
    Ok(Trajectory {
        record,
        final_params: w,
        martingale: mart,
        martingale_stopped_at: mart_stopped,
        twin_output_gap: twin_gap,
        ntk_checks,
        ntk_violations,
        deep_exit,
        steps: taken,
    })
}
