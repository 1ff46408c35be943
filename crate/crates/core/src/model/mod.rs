//! Differentiable predictors `h: ℝ^p → ℝ^n` evaluated on a fixed dataset.
//!
//! The output space is realized as `ℝ^n` (stacked outputs on the training
//! set) with the Euclidean inner product. Every model exposes an analytic
//! Jacobian; the hot path of the integrators only ever needs the products
//! `J v` and `Jᵀ u`, which [`Predictor::linearize`] provides without forming
//! `J` when the model supports it.

mod activation;
mod centered;
mod deep;
mod hessian;
mod linearized;
mod shallow;

use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::SquaredLoss;

pub use activation::Activation;
pub use centered::CenteredPredictor;
pub use deep::DeepNet;
pub use hessian::{dense_parameter_hessian, DEFAULT_DENSE_CAP};
pub use linearized::LinearizedPredictor;
pub use shallow::ShallowTanhNet;

/// Flat vector of all trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(DVector<f64>);

impl ParamVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("parameter vector is empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "parameter vector has non-finite entries".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(values))
    }

    pub fn zeros(p: usize) -> Self {
        Self(DVector::zeros(p))
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn distance(&self, other: &ParamVector) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

impl Deref for ParamVector {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut DVector<f64> {
        &mut self.0
    }
}

/// Contiguous parameter block belonging to one layer.
///
/// `layer == 0` is the output layer, `layer == k ≥ 1` the hidden matrix `W^(k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamBlock {
    pub layer: usize,
    pub range: std::ops::Range<usize>,
}

/// Model outputs and Jacobian products at one parameter point.
pub trait LocalJacobian {
    /// `h(ω)` on the dataset.
    fn outputs(&self) -> &DVector<f64>;
    /// `Dh(ω) v` for `v ∈ ℝ^p`.
    fn jvp(&self, v: &DVector<f64>) -> DVector<f64>;
    /// `Dhᵀ(ω) u` for `u ∈ ℝ^n`.
    fn vjp(&self, u: &DVector<f64>) -> DVector<f64>;
    /// The full `n × p` Jacobian.
    fn to_dense(&self) -> DMatrix<f64>;
    /// Empirical NTK Gram matrix `Dh Dhᵀ` (`n × n`).
    fn gram(&self) -> DMatrix<f64> {
        let jac = self.to_dense();
        &jac * jac.transpose()
    }
}

/// Outputs with an explicitly stored Jacobian.
pub struct DenseJacobian {
    outputs: DVector<f64>,
    jacobian: Arc<DMatrix<f64>>,
}

impl DenseJacobian {
    pub fn new(outputs: DVector<f64>, jacobian: Arc<DMatrix<f64>>) -> Self {
        Self { outputs, jacobian }
    }
}

impl LocalJacobian for DenseJacobian {
    fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    fn jvp(&self, v: &DVector<f64>) -> DVector<f64> {
        &*self.jacobian * v
    }

    fn vjp(&self, u: &DVector<f64>) -> DVector<f64> {
        self.jacobian.tr_mul(u)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        (*self.jacobian).clone()
    }

    fn gram(&self) -> DMatrix<f64> {
        &*self.jacobian * self.jacobian.transpose()
    }
}

pub trait Predictor: Send + Sync {
    fn num_params(&self) -> usize;

    /// Output vector `(h(ω)(x_i))_i`.
    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>>;

    /// `n × p` Jacobian; row `i` is `∇_ω h_i(ω)`.
    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>>;

    fn linearize<'a>(
        &'a self,
        params: &ParamVector,
        data: &'a Dataset,
    ) -> Result<Box<dyn LocalJacobian + 'a>> {
        let outputs = self.predict(params, data)?;
        let jac = self.jacobian(params, data)?;
        Ok(Box::new(DenseJacobian::new(outputs, Arc::new(jac))))
    }

    /// Analytic parameter Hessian `∇²_ω h_i(ω)` when the model provides one.
    fn output_hessian(
        &self,
        _params: &ParamVector,
        _data: &Dataset,
        _i: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        None
    }

    /// Layer decomposition of the parameter vector, for layered models.
    fn layer_blocks(&self) -> Option<Vec<ParamBlock>> {
        None
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn num_params(&self) -> usize {
        (**self).num_params()
    }

    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>> {
        (**self).predict(params, data)
    }

    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
        (**self).jacobian(params, data)
    }

    fn linearize<'a>(
        &'a self,
        params: &ParamVector,
        data: &'a Dataset,
    ) -> Result<Box<dyn LocalJacobian + 'a>> {
        (**self).linearize(params, data)
    }

    fn output_hessian(
        &self,
        params: &ParamVector,
        data: &Dataset,
        i: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        (**self).output_hessian(params, data, i)
    }

    fn layer_blocks(&self) -> Option<Vec<ParamBlock>> {
        (**self).layer_blocks()
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn num_params(&self) -> usize {
        (**self).num_params()
    }

    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>> {
        (**self).predict(params, data)
    }

    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
        (**self).jacobian(params, data)
    }

    fn linearize<'a>(
        &'a self,
        params: &ParamVector,
        data: &'a Dataset,
    ) -> Result<Box<dyn LocalJacobian + 'a>> {
        (**self).linearize(params, data)
    }

    fn output_hessian(
        &self,
        params: &ParamVector,
        data: &Dataset,
        i: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        (**self).output_hessian(params, data, i)
    }

    fn layer_blocks(&self) -> Option<Vec<ParamBlock>> {
        (**self).layer_blocks()
    }
}

pub(crate) fn check_params(model: &dyn Predictor, params: &ParamVector) -> Result<()> {
    if params.len() != model.num_params() {
        return Err(Error::dim("parameter vector", model.num_params(), params.len()));
    }
    Ok(())
}

/// Gradient of the single-sample loss `ω ↦ ℓ(x_i, α h(ω))`, i.e.
/// `α ∂ℓ/∂h(α h_i) ∇_ω h_i(ω)`.
pub fn per_sample_loss_gradient(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    loss: &SquaredLoss,
    alpha: f64,
    i: usize,
) -> Result<DVector<f64>> {
    if i >= data.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: data.len(),
        });
    }
    let local = model.linearize(params, data)?;
    let scaled = local.outputs()[i] * alpha;
    let mut e = DVector::zeros(data.len());
    e[i] = alpha * loss.derivative(scaled, data.targets()[i]);
    Ok(local.vjp(&e))
}

/// `∇_ω R(α h(ω))` for the averaged squared-error risk.
pub fn risk_parameter_gradient(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    alpha: f64,
) -> Result<DVector<f64>> {
    let local = model.linearize(params, data)?;
    let scaled = local.outputs() * alpha;
    let grad = crate::loss::risk_gradient(&scaled, data.targets())?;
    Ok(local.vjp(&grad) * alpha)
}
