use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{NoiseConvention, NoiseMode};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::SquaredLoss;
use crate::model::{check_params, LocalJacobian, ParamVector, Predictor};

/// One draw from `N(0, Σ(ω))` in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample(pub DVector<f64>);

/// Factorization `Σ = B Bᵀ` with `B = (1/√n) Jᵀ diag(s) C`, where `s_i` is the
/// per-sample loss slope (times α under the parameter convention) and `C`
/// centers over samples. Column `i` of `√n B` is `u_i − ū`.
#[derive(Debug, Clone)]
pub struct NoiseFactor {
    slopes: DVector<f64>,
}

impl NoiseFactor {
    pub fn new(
        outputs: &DVector<f64>,
        targets: &DVector<f64>,
        alpha: f64,
        convention: NoiseConvention,
    ) -> Self {
        let scale = convention.gradient_scale(alpha);
        let slopes = DVector::from_fn(outputs.len(), |i, _| {
            scale * SquaredLoss.derivative(alpha * outputs[i], targets[i])
        });
        Self { slopes }
    }

    pub fn slopes(&self) -> &DVector<f64> {
        &self.slopes
    }

    /// Output-space weights `v` with `B ξ = Jᵀ v`.
    pub fn output_weights(&self, xi: &DVector<f64>) -> DVector<f64> {
        let n = self.slopes.len();
        let mean = xi.mean();
        let inv = 1.0 / (n as f64).sqrt();
        DVector::from_fn(n, |i, _| self.slopes[i] * (xi[i] - mean) * inv)
    }

    /// `B ξ` for `ξ ∈ ℝ^n`.
    pub fn apply(&self, local: &dyn LocalJacobian, xi: &DVector<f64>) -> DVector<f64> {
        local.vjp(&self.output_weights(xi))
    }

    /// `Bᵀ w` given `J w`; lands in `ℝ^n`.
    pub fn transpose_from_jvp(&self, jw: &DVector<f64>) -> DVector<f64> {
        let n = self.slopes.len();
        let inv = 1.0 / (n as f64).sqrt();
        let prod = self.slopes.component_mul(jw);
        let mean = prod.mean();
        prod.map(|v| (v - mean) * inv)
    }

    /// Dense `p × p` covariance `B Bᵀ`.
    pub fn covariance(&self, local: &dyn LocalJacobian) -> DMatrix<f64> {
        let mut centered = local.to_dense();
        for (i, mut row) in centered.row_iter_mut().enumerate() {
            row *= self.slopes[i];
        }
        let mean = centered.row_mean();
        for mut row in centered.row_iter_mut() {
            row -= &mean;
        }
        let cov = centered.tr_mul(&centered) / centered.nrows() as f64;
        (&cov + cov.transpose()) * 0.5
    }
}

/// Standard normal driver for one step: `ℝ^n` in factor mode, `ℝ^p` in dense
/// mode, empty when noise is off.
pub fn draw_standard<R: Rng + ?Sized>(mode: NoiseMode, n: usize, p: usize, rng: &mut R) -> DVector<f64> {
    let len = match mode {
        NoiseMode::Factor => n,
        NoiseMode::DenseSqrt => p,
        NoiseMode::None => 0,
    };
    DVector::from_fn(len, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Draws from the gradient-noise law at `params`.
#[allow(clippy::too_many_arguments)]
pub fn sample_noise<R: Rng + ?Sized>(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    alpha: f64,
    convention: NoiseConvention,
    mode: NoiseMode,
    dense_cap: usize,
    rng: &mut R,
) -> Result<NoiseSample> {
    check_params(model, params)?;
    let (n, p) = (data.len(), params.len());
    if n < 2 {
        return Err(Error::InvalidArgument(
            "noise covariance needs at least two samples".into(),
        ));
    }
    if mode == NoiseMode::DenseSqrt && p > dense_cap {
        return Err(Error::Capacity {
            requested: p,
            cap: dense_cap,
        });
    }
    let local = model.linearize(params, data)?;
    let factor = NoiseFactor::new(local.outputs(), data.targets(), alpha, convention);
    let xi = draw_standard(mode, n, p, rng);
    let v = match mode {
        NoiseMode::Factor => factor.apply(local.as_ref(), &xi),
        NoiseMode::DenseSqrt => linalg::psd_sqrt(&factor.covariance(local.as_ref())) * xi,
        NoiseMode::None => DVector::zeros(p),
    };
    Ok(NoiseSample(v))
}
