use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::config::{NoiseMode, SgldConfig};
use super::martingale::scale_integrand;
use super::noise::{draw_standard, NoiseFactor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{empirical_risk, risk_gradient, SquaredLoss};
use crate::model::{check_params, LinearizedPredictor, LocalJacobian, ParamVector, Predictor};

/// Everything evaluated at the current state that the update, the recorder
/// and the martingale tracker share.
pub struct StepEval<'a> {
    pub local: Box<dyn LocalJacobian + 'a>,
    /// `αh(ω)`.
    pub scaled_outputs: DVector<f64>,
    /// `∇R(αh(ω))` in output space.
    pub risk_grad: DVector<f64>,
    pub gap: f64,
    pub factor: NoiseFactor,
    // Σ^{1/2}, only in dense mode
    root: Option<DMatrix<f64>>,
}

impl<'a> StepEval<'a> {
    pub fn new(
        model: &'a dyn Predictor,
        params: &ParamVector,
        data: &'a Dataset,
        config: &SgldConfig,
    ) -> Result<Self> {
        check_params(model, params)?;
        let local = model.linearize(params, data)?;
        let alpha = config.alpha;
        let scaled_outputs = local.outputs() * alpha;
        let gap = empirical_risk(&scaled_outputs, data.targets())?.gap;
        let risk_grad = risk_gradient(&scaled_outputs, data.targets())?;
        let factor = NoiseFactor::new(local.outputs(), data.targets(), alpha, config.noise_convention);
        let root = match config.noise_mode {
            NoiseMode::DenseSqrt => Some(linalg::psd_sqrt(&factor.covariance(local.as_ref()))),
            _ => None,
        };
        Ok(Self {
            local,
            scaled_outputs,
            risk_grad,
            gap,
            factor,
            root,
        })
    }

    /// `ω_{t+dt} − ω_t` for standard normal driver `xi`.
    pub fn em_increment(&self, config: &SgldConfig, xi: &DVector<f64>) -> DVector<f64> {
        let drift_weights = &self.risk_grad * (-config.dt / config.alpha);
        let noise_scale = config.eta_alpha.sqrt() / config.alpha * config.dt.sqrt();
        match config.noise_mode {
            NoiseMode::Factor => {
                let w = drift_weights + self.factor.output_weights(xi) * noise_scale;
                self.local.vjp(&w)
            }
            NoiseMode::DenseSqrt => {
                let root = self.root.as_ref().expect("dense root computed for dense mode");
                self.local.vjp(&drift_weights) + root * xi * noise_scale
            }
            NoiseMode::None => self.local.vjp(&drift_weights),
        }
    }

    /// Martingale integrand `(√η/R̄) σᵀ Dhᵀ ∇R`, in the coordinates of the
    /// standard normal driver.
    pub fn martingale_integrand(&self, config: &SgldConfig) -> Result<DVector<f64>> {
        let pulled = self.local.vjp(&self.risk_grad);
        let raw = match config.noise_mode {
            NoiseMode::Factor => self.factor.transpose_from_jvp(&self.local.jvp(&pulled)),
            NoiseMode::DenseSqrt => self.root.as_ref().expect("dense root") * pulled,
            NoiseMode::None => DVector::zeros(0),
        };
        scale_integrand(raw, config.eta_alpha, self.gap)
    }
}

pub(crate) fn finite_step(params: &ParamVector, increment: &DVector<f64>, step: usize) -> Result<ParamVector> {
    let next = params.as_vector() + increment;
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { step });
    }
    ParamVector::new(next)
}

/// One Euler–Maruyama step of the scaled SDE; `step` labels divergence errors.
pub fn em_step<R: Rng + ?Sized>(
    params: &ParamVector,
    model: &dyn Predictor,
    data: &Dataset,
    config: &SgldConfig,
    rng: &mut R,
    step: usize,
) -> Result<ParamVector> {
    config.validate_for(params.len())?;
    let eval = StepEval::new(model, params, data, config)?;
    if !eval.gap.is_finite() {
        return Err(Error::Divergence { step });
    }
    let xi = draw_standard(config.noise_mode, data.len(), params.len(), rng);
    finite_step(params, &eval.em_increment(config, &xi), step)
}

/// Euler–Maruyama step of the linear dynamics: frozen Jacobian, and the
/// linearized model's own noise covariance.
pub fn linearized_em_step<R: Rng + ?Sized>(
    params: &ParamVector,
    model: &LinearizedPredictor,
    data: &Dataset,
    config: &SgldConfig,
    rng: &mut R,
    step: usize,
) -> Result<ParamVector> {
    em_step(params, model, data, config, rng, step)
}

/// One single-sample SGD step as printed:
///
/// `ω − (η/α) Dhᵀ∇R(αh) + (√η/α) V`, `V = √η (Dhᵀ∇R(αh) − Dhᵀ∇ℓ(x, αh))`
///
/// with `x` uniform over the training set. One step covers `Δt = η` of SDE
/// time. The deviation always uses the pullback gradients, whatever the
/// configured noise convention.
pub fn sgd_step<R: Rng + ?Sized>(
    params: &ParamVector,
    model: &dyn Predictor,
    data: &Dataset,
    config: &SgldConfig,
    rng: &mut R,
    step: usize,
) -> Result<ParamVector> {
    config.validate()?;
    check_params(model, params)?;
    let local = model.linearize(params, data)?;
    let alpha = config.alpha;
    let eta = config.eta_alpha;
    let n = data.len();
    let i = rng.random_range(0..n);
    let full = risk_gradient(&(local.outputs() * alpha), data.targets())?;
    let mut single = DVector::zeros(n);
    single[i] = SquaredLoss.derivative(alpha * local.outputs()[i], data.targets()[i]);
    let deviation = (&full - &single) * eta.sqrt();
    let weights = &full * (-eta / alpha) + deviation * (eta.sqrt() / alpha);
    finite_step(params, &local.vjp(&weights), step)
}
