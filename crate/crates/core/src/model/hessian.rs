use nalgebra::DMatrix;

use super::{risk_parameter_gradient, ParamVector, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::SquaredLoss;

/// Largest parameter count for which dense `p × p` Hessians are formed.
pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Dense Hessian of `ω ↦ R(α h(ω))`.
///
/// With analytic output Hessians this is the Gauss–Newton plus residual split
/// `(α²/n) Σ ℓ'' J_i J_iᵀ + (α/n) Σ ℓ'(α h_i) ∇²h_i`; otherwise central
/// differences of the analytic risk gradient, symmetrized.
pub fn dense_parameter_hessian(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    loss: &SquaredLoss,
    alpha: f64,
    cap: usize,
) -> Result<DMatrix<f64>> {
    let p = model.num_params();
    if p > cap {
        return Err(Error::Capacity { requested: p, cap });
    }
    super::check_params(model, params)?;
    match analytic(model, params, data, loss, alpha)? {
        Some(h) => Ok(h),
        None => finite_difference(model, params, data, alpha),
    }
}

fn analytic(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    loss: &SquaredLoss,
    alpha: f64,
) -> Result<Option<DMatrix<f64>>> {
    let n = data.len();
    let mut residual_part = DMatrix::zeros(params.len(), params.len());
    let local = model.linearize(params, data)?;
    for i in 0..n {
        let Some(hess) = model.output_hessian(params, data, i) else {
            return Ok(None);
        };
        let weight = alpha * loss.derivative(alpha * local.outputs()[i], data.targets()[i]) / n as f64;
        residual_part += hess? * weight;
    }
    let jac = local.to_dense();
    let gauss_newton = jac.tr_mul(&jac) * (alpha * alpha * loss.second_derivative() / n as f64);
    Ok(Some(gauss_newton + residual_part))
}

fn finite_difference(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let p = params.len();
    let mut hess = DMatrix::zeros(p, p);
    for k in 0..p {
        let step = 1e-5 * params[k].abs().max(1.0);
        let mut plus = params.clone();
        plus[k] += step;
        let mut minus = params.clone();
        minus[k] -= step;
        let col = (risk_parameter_gradient(model, &plus, data, alpha)?
            - risk_parameter_gradient(model, &minus, data, alpha)?)
            / (2.0 * step);
        hess.set_column(k, &col);
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::{Activation, CenteredPredictor, DeepNet, LinearizedPredictor, ShallowTanhNet};
    use super::*;
    use crate::linalg::max_asymmetry;

    #[test]
    fn linearized_hessian_is_gauss_newton() {
        let base = ShallowTanhNet::new(3, 2, gaussian_params(3, 1).into_inner()).unwrap();
        let w0 = gaussian_params(6, 2);
        let ds = gaussian_dataset(4, 2, 3);
        let lin = LinearizedPredictor::new(&base, w0, &ds).unwrap();
        let alpha = 2.5;
        let w = gaussian_params(6, 4);
        let h = dense_parameter_hessian(&lin, &w, &ds, &SquaredLoss, alpha, DEFAULT_DENSE_CAP).unwrap();
        let j0 = lin.frozen_jacobian();
        let expected = j0.tr_mul(j0) * (2.0 * alpha * alpha / 4.0);
        assert!((h - expected).amax() < 1e-12);
    }

    #[test]
    fn shallow_decomposition_matches_finite_differences() {
        // m=2, d=2, n=3
        let net = ShallowTanhNet::new(2, 2, gaussian_params(2, 11).into_inner()).unwrap();
        let ds = gaussian_dataset(3, 2, 12);
        let w = gaussian_params(4, 13);
        let alpha = 1.7;
        let analytic = dense_parameter_hessian(&net, &w, &ds, &SquaredLoss, alpha, 100).unwrap();
        let fd = finite_difference(&net, &w, &ds, alpha).unwrap();
        assert!((&analytic - &fd).amax() <= 1e-5, "{}", (&analytic - &fd).amax());
        assert!(max_asymmetry(&analytic) <= 1e-10 * analytic.amax());
    }

    #[test]
    fn fallback_for_deep_nets_is_symmetric() {
        let base = DeepNet::new(2, 2, 2, Activation::Tanh).unwrap();
        let w0 = gaussian_params(base.num_params(), 1);
        let model = CenteredPredictor::new(base, w0.clone()).unwrap();
        let ds = gaussian_dataset(3, 2, 2);
        let h = dense_parameter_hessian(&model, &w0, &ds, &SquaredLoss, 1.0, 100).unwrap();
        assert_eq!(h.nrows(), model.num_params());
        assert!(max_asymmetry(&h) <= 1e-10 * h.amax());
    }

    #[test]
    fn capacity_guard() {
        let net = ShallowTanhNet::new(10, 5, gaussian_params(10, 1).into_inner()).unwrap();
        let ds = gaussian_dataset(2, 5, 2);
        let err = dense_parameter_hessian(&net, &gaussian_params(50, 3), &ds, &SquaredLoss, 1.0, 49)
            .unwrap_err();
        assert!(matches!(err, Error::Capacity { requested: 50, cap: 49 }));
    }
}
