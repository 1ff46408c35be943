use nalgebra::{DMatrix, DVector};

use super::{check_params, Activation, ParamBlock, ParamVector, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Fully connected network of depth `H`:
///
/// `x^(k) = √(c_σ/m) σ(W^(k) x^(k−1))` for `1 ≤ k ≤ H`, `f(x) = aᵀ x^(H)`.
///
/// Parameter layout: `W^(1)` (`m × d`), then `W^(2) … W^(H)` (`m × m`), each
/// row-major, then `a` unless the output layer is frozen.
#[derive(Debug, Clone)]
pub struct DeepNet {
    depth: usize,
    width: usize,
    input_dim: usize,
    activation: Activation,
    c_sigma: f64,
    frozen_output: Option<DVector<f64>>,
}

struct Forward {
    // x^(0) … x^(H), each n × fan
    layers: Vec<DMatrix<f64>>,
    // pre-activations z^(1) … z^(H)
    pre: Vec<DMatrix<f64>>,
}

impl DeepNet {
    pub fn new(depth: usize, width: usize, input_dim: usize, activation: Activation) -> Result<Self> {
        if depth == 0 || width == 0 || input_dim == 0 {
            return Err(Error::InvalidArgument(
                "depth, width and input_dim must be positive".into(),
            ));
        }
        Ok(Self {
            depth,
            width,
            input_dim,
            activation,
            c_sigma: activation.c_sigma(),
            frozen_output: None,
        })
    }

    /// Same network with the output vector `a` fixed and excluded from the
    /// parameters.
    pub fn with_frozen_output(mut self, a: DVector<f64>) -> Result<Self> {
        if a.len() != self.width {
            return Err(Error::dim("output layer", self.width, a.len()));
        }
        self.frozen_output = Some(a);
        Ok(self)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn c_sigma(&self) -> f64 {
        self.c_sigma
    }

    fn fan_in(&self, k: usize) -> usize {
        if k == 1 {
            self.input_dim
        } else {
            self.width
        }
    }

    fn hidden_offset(&self, k: usize) -> usize {
        (1..k).map(|j| self.fan_in(j) * self.width).sum()
    }

    fn hidden_len(&self) -> usize {
        self.hidden_offset(self.depth + 1)
    }

    fn output_layer(&self, params: &ParamVector) -> DVector<f64> {
        match &self.frozen_output {
            Some(a) => a.clone(),
            None => params.rows(self.hidden_len(), self.width).into_owned(),
        }
    }

    // W^(k)ᵀ as a fan_in × m matrix (row-major m × fan_in read column-major).
    fn weight_t(&self, params: &ParamVector, k: usize) -> DMatrix<f64> {
        let off = self.hidden_offset(k);
        let len = self.fan_in(k) * self.width;
        DMatrix::from_column_slice(self.fan_in(k), self.width, &params.as_slice()[off..off + len])
    }

    fn scale(&self) -> f64 {
        (self.c_sigma / self.width as f64).sqrt()
    }

    fn check(&self, params: &ParamVector, data: &Dataset) -> Result<()> {
        check_params(self, params)?;
        if data.input_dim() != self.input_dim {
            return Err(Error::dim("input dimension", self.input_dim, data.input_dim()));
        }
        Ok(())
    }

    fn forward(&self, params: &ParamVector, data: &Dataset) -> Forward {
        let s = self.scale();
        let mut layers = vec![data.inputs().clone()];
        let mut pre = Vec::with_capacity(self.depth);
        for k in 1..=self.depth {
            let z = &layers[k - 1] * self.weight_t(params, k);
            let act = self.activation;
            layers.push(z.map(|v| s * act.value(v)));
            pre.push(z);
        }
        Forward { layers, pre }
    }

    /// Backpropagated `∂f/∂z^(k)` for every sample, `k = 1..=H` (index `k−1`).
    fn backward(&self, params: &ParamVector, fwd: &Forward) -> Vec<DMatrix<f64>> {
        let s = self.scale();
        let a = self.output_layer(params);
        let n = fwd.layers[0].nrows();
        let mut upstream = DMatrix::from_fn(n, self.width, |_, j| a[j]);
        let mut grads = vec![DMatrix::zeros(0, 0); self.depth];
        for k in (1..=self.depth).rev() {
            let act = self.activation;
            let g = fwd.pre[k - 1].map(|v| s * act.derivative(v)).component_mul(&upstream);
            if k > 1 {
                upstream = &g * self.weight_t(params, k).transpose();
            }
            grads[k - 1] = g;
        }
        grads
    }

    /// Layer contribution `G^(k)` to the NTK Gram matrix, `k = 1..=H` for the
    /// hidden matrices and `k = H + 1` for the output vector.
    ///
    /// Uses `⟨∂f_i/∂W, ∂f_j/∂W⟩ = (g_i·g_j)(x_i·x_j)` for a matrix layer.
    pub fn layer_gram(&self, params: &ParamVector, data: &Dataset, k: usize) -> Result<DMatrix<f64>> {
        self.check(params, data)?;
        if k == 0 || k > self.depth + 1 {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.depth + 2,
            });
        }
        let fwd = self.forward(params, data);
        if k == self.depth + 1 {
            if self.frozen_output.is_some() {
                return Ok(DMatrix::zeros(data.len(), data.len()));
            }
            let top = &fwd.layers[self.depth];
            return Ok(top * top.transpose());
        }
        let grads = self.backward(params, &fwd);
        let g = &grads[k - 1];
        let x = &fwd.layers[k - 1];
        Ok((g * g.transpose()).component_mul(&(x * x.transpose())))
    }
}

impl Predictor for DeepNet {
    fn num_params(&self) -> usize {
        self.hidden_len() + if self.frozen_output.is_some() { 0 } else { self.width }
    }

    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>> {
        self.check(params, data)?;
        let fwd = self.forward(params, data);
        Ok(&fwd.layers[self.depth] * self.output_layer(params))
    }

    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
        self.check(params, data)?;
        let fwd = self.forward(params, data);
        let grads = self.backward(params, &fwd);
        let n = data.len();
        let mut jac = DMatrix::zeros(n, self.num_params());
        for k in 1..=self.depth {
            let off = self.hidden_offset(k);
            let fan = self.fan_in(k);
            let g = &grads[k - 1];
            let x = &fwd.layers[k - 1];
            for i in 0..n {
                for r in 0..self.width {
                    let gr = g[(i, r)];
                    for c in 0..fan {
                        jac[(i, off + r * fan + c)] = gr * x[(i, c)];
                    }
                }
            }
        }
        if self.frozen_output.is_none() {
            let off = self.hidden_len();
            jac.view_mut((0, off), (n, self.width))
                .copy_from(&fwd.layers[self.depth]);
        }
        Ok(jac)
    }

    fn layer_blocks(&self) -> Option<Vec<ParamBlock>> {
        let mut blocks: Vec<ParamBlock> = (1..=self.depth)
            .map(|k| {
                let off = self.hidden_offset(k);
                ParamBlock {
                    layer: k,
                    range: off..off + self.fan_in(k) * self.width,
                }
            })
            .collect();
        if self.frozen_output.is_none() {
            let off = self.hidden_len();
            blocks.push(ParamBlock {
                layer: 0,
                range: off..off + self.width,
            });
        }
        Some(blocks)
    }
}
