use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};

use super::{LocalJacobian, ParamBlock, ParamVector, Predictor};
use crate::data::Dataset;
use crate::error::Result;

/// `h̃(ω) = h(ω) − h(ω₀)`: the base model shifted so it vanishes at `ω₀`.
pub struct CenteredPredictor<P> {
    base: P,
    origin: ParamVector,
    // base outputs at ω₀, keyed by dataset fingerprint
    offsets: Mutex<Vec<(u64, Arc<DVector<f64>>)>>,
}

impl<P: Predictor> CenteredPredictor<P> {
    pub fn new(base: P, origin: ParamVector) -> Result<Self> {
        super::check_params(&base, &origin)?;
        Ok(Self {
            base,
            origin,
            offsets: Mutex::new(Vec::new()),
        })
    }

    pub fn base(&self) -> &P {
        &self.base
    }

    pub fn origin(&self) -> &ParamVector {
        &self.origin
    }

    fn offset(&self, data: &Dataset) -> Result<Arc<DVector<f64>>> {
        let key = data.fingerprint();
        if let Some((_, v)) = self.offsets.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return Ok(Arc::clone(v));
        }
        let value = Arc::new(self.base.predict(&self.origin, data)?);
        let mut cache = self.offsets.lock().unwrap();
        if cache.len() >= 8 {
            cache.remove(0);
        }
        cache.push((key, Arc::clone(&value)));
        Ok(value)
    }
}

impl<P: Predictor> Predictor for CenteredPredictor<P> {
    fn num_params(&self) -> usize {
        self.base.num_params()
    }

    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>> {
        let out = self.base.predict(params, data)?;
        Ok(out - &*self.offset(data)?)
    }

    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
        self.base.jacobian(params, data)
    }

    fn linearize<'a>(
        &'a self,
        params: &ParamVector,
        data: &'a Dataset,
    ) -> Result<Box<dyn LocalJacobian + 'a>> {
        let inner = self.base.linearize(params, data)?;
        let outputs = inner.outputs() - &*self.offset(data)?;
        Ok(Box::new(Shifted { inner, outputs }))
    }

    fn output_hessian(
        &self,
        params: &ParamVector,
        data: &Dataset,
        i: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        self.base.output_hessian(params, data, i)
    }

    fn layer_blocks(&self) -> Option<Vec<ParamBlock>> {
        self.base.layer_blocks()
    }
}

struct Shifted<'a> {
    inner: Box<dyn LocalJacobian + 'a>,
    outputs: DVector<f64>,
}

impl LocalJacobian for Shifted<'_> {
    fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    fn jvp(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner.jvp(v)
    }

    fn vjp(&self, u: &DVector<f64>) -> DVector<f64> {
        self.inner.vjp(u)
    }

    fn to_dense(&self) -> DMatrix<f64> {
        self.inner.to_dense()
    }

    fn gram(&self) -> DMatrix<f64> {
        self.inner.gram()
    }
}
