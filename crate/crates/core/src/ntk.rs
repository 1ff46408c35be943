//! Empirical neural tangent kernel: Gram matrices, their smallest eigenvalue,
//! and the lazy radius.
//!
//! `λ²` always denotes the smallest eigenvalue of the `n × n` Gram matrix
//! `Dh Dhᵀ`; `λ = √λ²` wherever a formula needs the unsquared quantity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DeepNet, ParamVector, Predictor};

/// Relative tolerance used when accepting a Gram matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric positive semidefinite `n × n` kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct NtkGram(DMatrix<f64>);

impl NtkGram {
    /// Wraps a matrix after checking symmetry; the stored copy is exactly
    /// symmetric.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        linalg::check_symmetric(&matrix, SYMMETRY_TOL)?;
        Ok(Self(symmetrize(matrix)))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Smallest eigenvalue, i.e. `λ²`.
    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_symmetric_eigenvalue(&self.0)
    }
}

fn symmetrize(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    a
}

/// `J Jᵀ` for an `n × p` Jacobian.
pub fn gram(jacobian: &DMatrix<f64>) -> Result<NtkGram> {
    if jacobian.nrows() == 0 || jacobian.ncols() == 0 {
        return Err(Error::InvalidArgument("empty Jacobian".into()));
    }
    Ok(NtkGram(symmetrize(jacobian * jacobian.transpose())))
}

/// Gram matrix of `model` at `params`, via the model's fastest route.
pub fn model_gram(model: &dyn Predictor, params: &ParamVector, data: &Dataset) -> Result<NtkGram> {
    let local = model.linearize(params, data)?;
    Ok(NtkGram(symmetrize(local.gram())))
}

/// Smallest eigenvalue of a symmetric matrix; dense eigensolver up to
/// [`linalg::DENSE_EIGEN_LIMIT`], shifted power iteration above.
pub fn min_eigenvalue(matrix: &DMatrix<f64>) -> Result<f64> {
    linalg::check_symmetric(matrix, SYMMETRY_TOL)?;
    Ok(linalg::min_symmetric_eigenvalue(matrix))
}

/// `r = λ / Lip(Dh)`: the radius around `ω₀` inside which the kernel stays
/// nondegenerate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LazyRadius {
    pub r: f64,
    pub lambda: f64,
    pub lip_dh: f64,
}

pub fn lazy_radius(lambda: f64, lip_dh: f64) -> Result<LazyRadius> {
    if !(lambda > 0.0 && lip_dh > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lazy radius needs positive inputs, got lambda={lambda}, lip_dh={lip_dh}"
        )));
    }
    Ok(LazyRadius {
        r: lambda / lip_dh,
        lambda,
        lip_dh,
    })
}

/// Layer contribution `G^(k)`; `k = H + 1` selects the output layer.
pub fn layerwise_gram(
    net: &DeepNet,
    params: &ParamVector,
    data: &Dataset,
    layer: usize,
) -> Result<NtkGram> {
    Ok(NtkGram(symmetrize(net.layer_gram(params, data, layer)?)))
}
