use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{DenseJacobian, LocalJacobian, ParamVector, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// First-order expansion `h̄(ω) = h(ω₀) + Dh(ω₀)(ω − ω₀)` of a base model on a
/// fixed dataset.
pub struct LinearizedPredictor {
    origin: ParamVector,
    offset: DVector<f64>,
    jacobian: Arc<DMatrix<f64>>,
    fingerprint: u64,
}

impl LinearizedPredictor {
    pub fn new(base: &dyn Predictor, origin: ParamVector, data: &Dataset) -> Result<Self> {
        let local = base.linearize(&origin, data)?;
        Ok(Self {
            offset: local.outputs().clone(),
            jacobian: Arc::new(local.to_dense()),
            origin,
            fingerprint: data.fingerprint(),
        })
    }

    pub fn origin(&self) -> &ParamVector {
        &self.origin
    }

    pub fn frozen_jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    fn check(&self, params: &ParamVector, data: &Dataset) -> Result<()> {
        super::check_params(self, params)?;
        if data.fingerprint() != self.fingerprint || data.len() != self.offset.len() {
            return Err(Error::DatasetMismatch);
        }
        Ok(())
    }
}

impl Predictor for LinearizedPredictor {
    fn num_params(&self) -> usize {
        self.origin.len()
    }

    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>> {
        self.check(params, data)?;
        let delta = params.as_vector() - self.origin.as_vector();
        Ok(&self.offset + &*self.jacobian * delta)
    }

    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
        self.check(params, data)?;
        Ok((*self.jacobian).clone())
    }

    fn linearize<'a>(
        &'a self,
        params: &ParamVector,
        data: &'a Dataset,
    ) -> Result<Box<dyn LocalJacobian + 'a>> {
        let outputs = self.predict(params, data)?;
        Ok(Box::new(DenseJacobian::new(outputs, Arc::clone(&self.jacobian))))
    }

    fn output_hessian(
        &self,
        params: &ParamVector,
        data: &Dataset,
        _i: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        let p = self.num_params();
        Some(self.check(params, data).map(|_| DMatrix::zeros(p, p)))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::testutil::*;
    use super::super::ShallowTanhNet;
    use super::*;

    fn setup(seed: u64) -> (LinearizedPredictor, Dataset, DMatrix<f64>) {
        let base = ShallowTanhNet::new(3, 2, gaussian_params(3, seed).into_inner()).unwrap();
        let w0 = gaussian_params(6, seed + 1);
        let ds = gaussian_dataset(4, 2, seed + 2);
        let j0 = base.jacobian(&w0, &ds).unwrap();
        (LinearizedPredictor::new(&base, w0, &ds).unwrap(), ds, j0)
    }

    #[test]
    fn jacobian_is_frozen() {
        let (lin, ds, j0) = setup(1);
        for s in 0..3 {
            let w = gaussian_params(6, 100 + s);
            assert_eq!(lin.jacobian(&w, &ds).unwrap(), j0);
        }
    }

    #[test]
    fn rejects_other_dataset() {
        let (lin, _, _) = setup(2);
        let other = gaussian_dataset(4, 2, 99);
        assert!(matches!(
            lin.predict(&gaussian_params(6, 1), &other),
            Err(Error::DatasetMismatch)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn predict_is_affine(seed in 0u64..10_000) {
            let (lin, ds, _) = setup(seed);
            let w1 = gaussian_params(6, seed + 10);
            let w2 = gaussian_params(6, seed + 11);
            let mid = ParamVector::new((w1.as_vector() + w2.as_vector()) * 0.5).unwrap();
            let lhs = lin.predict(&w1, &ds).unwrap() + lin.predict(&w2, &ds).unwrap()
                - lin.predict(&mid, &ds).unwrap() * 2.0;
            prop_assert!(lhs.amax() <= 1e-12);
        }
    }
}
