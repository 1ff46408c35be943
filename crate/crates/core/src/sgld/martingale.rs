use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Running stochastic integral `M`, its quadratic variation, and the
/// exponential `ℰ = exp(M − QV/2)`.
///
/// With the integrand frozen over each step and Gaussian increments, the
/// discrete `ℰ` is itself an exact martingale with unit mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleState {
    pub m: f64,
    pub qv: f64,
    pub e: f64,
}

impl Default for MartingaleState {
    fn default() -> Self {
        Self {
            m: 0.0,
            qv: 0.0,
            e: 1.0,
        }
    }
}

/// `M += a·dW`, `QV += ‖a‖² dt`, where `a` already carries the `√η/R̄`
/// factor and `dW = √dt ξ` is the increment driving the trajectory.
pub fn advance_martingale(
    state: MartingaleState,
    integrand: &DVector<f64>,
    increment: &DVector<f64>,
    dt: f64,
) -> Result<MartingaleState> {
    if integrand.len() != increment.len() {
        return Err(Error::dim("martingale increment", integrand.len(), increment.len()));
    }
    let m = state.m + integrand.dot(increment);
    let qv = state.qv + integrand.norm_squared() * dt;
    Ok(MartingaleState {
        m,
        qv,
        e: (m - 0.5 * qv).exp(),
    })
}

/// Integrand `(√η/R̄) σᵀ Dhᵀ ∇R` from its unscaled form `σᵀ Dhᵀ ∇R`.
pub fn scale_integrand(raw: DVector<f64>, eta_alpha: f64, gap: f64) -> Result<DVector<f64>> {
    if gap.is_nan() || gap <= 0.0 || !gap.is_finite() {
        return Err(Error::GapDegenerate { gap });
    }
    Ok(raw * (eta_alpha.sqrt() / gap))
}

#[cfg(test)]
mod tests {
    use rand::Rng;
    use rand_distr::StandardNormal;

    use super::*;
    use crate::model::testutil::rng;

    #[test]
    fn zero_integrand_keeps_state() {
        let s = MartingaleState { m: 0.3, qv: 0.1, e: (0.3f64 - 0.05).exp() };
        let next = advance_martingale(s, &DVector::zeros(3), &DVector::from_element(3, 0.7), 0.1).unwrap();
        assert_eq!(next.m, s.m);
        assert_eq!(next.qv, s.qv);
        assert!((next.e - s.e).abs() < 1e-15);
    }

    #[test]
    fn one_step_value() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        let dw = DVector::from_vec(vec![0.5, -0.25]);
        let s = advance_martingale(MartingaleState::default(), &a, &dw, 0.01).unwrap();
        assert_eq!(s.m, 0.0);
        assert!((s.qv - 0.05).abs() < 1e-15);
        assert!((s.e - (-0.025f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn gap_guard() {
        assert!(matches!(
            scale_integrand(DVector::zeros(2), 0.01, 0.0),
            Err(Error::GapDegenerate { .. })
        ));
        let a = scale_integrand(DVector::from_element(1, 2.0), 0.04, 4.0).unwrap();
        assert!((a[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn qv_nondecreasing_and_e_positive() {
        let mut r = rng(5);
        let mut s = MartingaleState::default();
        for _ in 0..1000 {
            let a = DVector::from_fn(4, |_, _| r.sample::<f64, _>(StandardNormal));
            let dw = DVector::from_fn(4, |_, _| 0.1 * r.sample::<f64, _>(StandardNormal));
            let next = advance_martingale(s, &a, &dw, 0.01).unwrap();
            assert!(next.qv >= s.qv);
            assert!(next.e > 0.0);
            s = next;
        }
    }

    #[test]
    fn constant_integrand_has_unit_mean() {
        // E[exp(a·ξ√dt − ‖a‖²dt/2)] = 1 exactly for Gaussian ξ.
        let mut r = rng(11);
        let a = DVector::from_vec(vec![0.6, -0.3]);
        let dt: f64 = 0.05;
        let trials = 40_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..trials {
            let mut s = MartingaleState::default();
            for _ in 0..20 {
                let dw = DVector::from_fn(2, |_, _| dt.sqrt() * r.sample::<f64, _>(StandardNormal));
                s = advance_martingale(s, &a, &dw, dt).unwrap();
            }
            sum += s.e;
            sq += s.e * s.e;
        }
        let mean = sum / trials as f64;
        let se = ((sq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!((mean - 1.0).abs() <= 4.0 * se, "mean {mean} se {se}");
    }
}
