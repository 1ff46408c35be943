use nalgebra::{DMatrix, DVector};

use super::activation::tanh;
use super::{check_params, LocalJacobian, ParamVector, Predictor};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// One-hidden-layer tanh network with frozen output coefficients:
///
/// `φ(x; ω) = (1/√m) Σ_j c_j tanh(ω_jᵀ x)`.
///
/// Parameters are the hidden rows `ω_j ∈ ℝ^d` stored row-major, so block `j`
/// occupies indices `j·d .. (j+1)·d`.
#[derive(Debug, Clone)]
pub struct ShallowTanhNet {
    width: usize,
    input_dim: usize,
    coefficients: DVector<f64>,
    // c / √m, the effective output weights
    scaled: DVector<f64>,
}

impl ShallowTanhNet {
    pub fn new(width: usize, input_dim: usize, coefficients: DVector<f64>) -> Result<Self> {
        if width == 0 || input_dim == 0 {
            return Err(Error::InvalidArgument(
                "width and input_dim must be positive".into(),
            ));
        }
        if coefficients.len() != width {
            return Err(Error::dim("output coefficients", width, coefficients.len()));
        }
        let scaled = &coefficients / (width as f64).sqrt();
        Ok(Self {
            width,
            input_dim,
            coefficients,
            scaled,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    fn check(&self, params: &ParamVector, data: &Dataset) -> Result<()> {
        check_params(self, params)?;
        if data.input_dim() != self.input_dim {
            return Err(Error::dim("input dimension", self.input_dim, data.input_dim()));
        }
        Ok(())
    }

    /// Pre-activations `Z = X Ωᵀ` (`n × m`).
    fn preactivations(&self, params: &ParamVector, data: &Dataset) -> DMatrix<f64> {
        // Row-major m×d parameters read as column-major d×m is exactly Ωᵀ.
        let omega_t = DMatrix::from_column_slice(self.input_dim, self.width, params.as_slice());
        data.inputs() * omega_t
    }
}

impl Predictor for ShallowTanhNet {
    fn num_params(&self) -> usize {
        self.width * self.input_dim
    }

    fn predict(&self, params: &ParamVector, data: &Dataset) -> Result<DVector<f64>> {
        self.check(params, data)?;
        let act = self.preactivations(params, data).map(tanh);
        Ok(act * &self.scaled)
    }

    fn jacobian(&self, params: &ParamVector, data: &Dataset) -> Result<DMatrix<f64>> {
        Ok(self.linearize(params, data)?.to_dense())
    }

    fn linearize<'a>(
        &'a self,
        params: &ParamVector,
        data: &'a Dataset,
    ) -> Result<Box<dyn LocalJacobian + 'a>> {
        self.check(params, data)?;
        let mut act = self.preactivations(params, data);
        act.apply(|z| *z = tanh(*z));
        let outputs = &act * &self.scaled;
        // Scale column j of sech² by c_j/√m once; every product below uses it.
        let mut weighted = act.map(|t| 1.0 - t * t);
        for (j, mut col) in weighted.column_iter_mut().enumerate() {
            col *= self.scaled[j];
        }
        Ok(Box::new(ShallowLocal {
            net: self,
            inputs: data.inputs(),
            weighted,
            outputs,
        }))
    }

    fn output_hessian(
        &self,
        params: &ParamVector,
        data: &Dataset,
        i: usize,
    ) -> Option<Result<DMatrix<f64>>> {
        Some(self.sample_hessian(params, data, i))
    }
}

impl ShallowTanhNet {
    /// Block-diagonal `∇²_ω φ(x_i)`: block `j` is `(c_j/√m) σ''(ω_jᵀx_i) x_i x_iᵀ`,
    /// off-diagonal blocks vanish.
    fn sample_hessian(&self, params: &ParamVector, data: &Dataset, i: usize) -> Result<DMatrix<f64>> {
        self.check(params, data)?;
        if i >= data.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: data.len(),
            });
        }
        let d = self.input_dim;
        let x = data.input(i);
        let outer = &x * x.transpose();
        let mut hess = DMatrix::zeros(self.num_params(), self.num_params());
        for j in 0..self.width {
            let w = params.rows(j * d, d);
            let t = tanh(w.dot(&x));
            let s2 = -2.0 * t * (1.0 - t * t);
            hess.view_mut((j * d, j * d), (d, d))
                .copy_from(&(&outer * (self.scaled[j] * s2)));
        }
        Ok(hess)
    }
}

struct ShallowLocal<'a> {
    net: &'a ShallowTanhNet,
    inputs: &'a DMatrix<f64>,
    // (c_j/√m) sech²(ω_jᵀ x_i), n × m
    weighted: DMatrix<f64>,
    outputs: DVector<f64>,
}

impl LocalJacobian for ShallowLocal<'_> {
    fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    fn jvp(&self, v: &DVector<f64>) -> DVector<f64> {
        let v_t = DMatrix::from_column_slice(self.net.input_dim, self.net.width, v.as_slice());
        let mut proj = self.inputs * v_t;
        proj.component_mul_assign(&self.weighted);
        proj * DVector::from_element(self.net.width, 1.0)
    }

    fn vjp(&self, u: &DVector<f64>) -> DVector<f64> {
        // column-major walk: scale each column of the weights by u
        let mut a = self.weighted.clone();
        for mut col in a.column_iter_mut() {
            col.component_mul_assign(u);
        }
        // Xᵀ A is d × m column-major, i.e. the m×d row-major gradient blocks.
        let g = self.inputs.transpose() * a;
        DVector::from_column_slice(g.as_slice())
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let (n, d, m) = (self.inputs.nrows(), self.net.input_dim, self.net.width);
        DMatrix::from_fn(n, m * d, |i, col| {
            let (j, k) = (col / d, col % d);
            self.weighted[(i, j)] * self.inputs[(i, k)]
        })
    }

    // J_i·J_k = (Σ_j w_ij w_kj)(x_i·x_k)
    fn gram(&self) -> DMatrix<f64> {
        let hidden = &self.weighted * self.weighted.transpose();
        let inputs = self.inputs * self.inputs.transpose();
        hidden.component_mul(&inputs)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::super::testutil::*;
    use super::*;

    fn net(m: usize, d: usize, seed: u64) -> ShallowTanhNet {
        let c = gaussian_params(m, seed);
        ShallowTanhNet::new(m, d, c.into_inner()).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let ds = gaussian_dataset(5, 3, 1);
        let n = net(4, 3, 2);
        let out = n.predict(&ParamVector::zeros(12), &ds).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_evaluation() {
        let ds = Dataset::from_rows(&[vec![1.0]], vec![0.0]).unwrap();
        let n = ShallowTanhNet::new(1, 1, DVector::from_vec(vec![1.0])).unwrap();
        let out = n.predict(&ParamVector::from_vec(vec![1.0]).unwrap(), &ds).unwrap();
        assert!((out[0] - 0.761_594_155_955_764_9).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let ds = gaussian_dataset(2, 3, 1);
        let n = net(2, 3, 2);
        assert!(matches!(
            n.predict(&ParamVector::zeros(5), &ds),
            Err(Error::Dimension { .. })
        ));
        let other = gaussian_dataset(2, 2, 1);
        assert!(n.predict(&ParamVector::zeros(6), &other).is_err());
    }

    #[test]
    fn jacobian_block_formula() {
        // ∂φ(x)/∂ω_j = (c_j/√m) σ'(ω_jᵀx) xᵀ
        let ds = gaussian_dataset(3, 2, 11);
        let n = net(3, 2, 12);
        let w = gaussian_params(6, 13);
        let jac = n.jacobian(&w, &ds).unwrap();
        for i in 0..3 {
            let x = ds.input(i);
            for j in 0..3 {
                let wj = w.rows(j * 2, 2);
                let sp = 1.0 - wj.dot(&x).tanh().powi(2);
                let coef = n.coefficients()[j] / 3f64.sqrt() * sp;
                for k in 0..2 {
                    assert!((jac[(i, j * 2 + k)] - coef * x[k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let ds = gaussian_dataset(4, 2, 21);
        let n = net(3, 2, 22);
        let w = gaussian_params(6, 23);
        let analytic = n.jacobian(&w, &ds).unwrap();
        let fd = fd_jacobian(&n, &w, &ds, 1e-5);
        assert!(max_rel_err(&analytic, &fd) <= 1e-6);
    }

    #[test]
    fn products_match_dense_jacobian() {
        let ds = gaussian_dataset(5, 3, 31);
        let n = net(4, 3, 32);
        let w = gaussian_params(12, 33);
        let local = n.linearize(&w, &ds).unwrap();
        let jac = local.to_dense();
        let v = gaussian_params(12, 34).into_inner();
        let u = gaussian_params(5, 35).into_inner();
        assert!((local.jvp(&v) - &jac * &v).amax() < 1e-13);
        assert!((local.vjp(&u) - jac.tr_mul(&u)).amax() < 1e-13);
        assert!((local.gram() - &jac * jac.transpose()).amax() < 1e-12);
    }

    #[test]
    fn hessian_is_block_diagonal_and_matches_fd() {
        let ds = gaussian_dataset(2, 2, 41);
        let n = net(3, 2, 42);
        let w = gaussian_params(6, 43);
        let h = n.output_hessian(&w, &ds, 1).unwrap().unwrap();
        for r in 0..6 {
            for c in 0..6 {
                if r / 2 != c / 2 {
                    assert_eq!(h[(r, c)], 0.0);
                }
            }
        }
        let step = 1e-5;
        for k in 0..6 {
            let mut plus = w.clone();
            plus[k] += step;
            let mut minus = w.clone();
            minus[k] -= step;
            let gp = n.jacobian(&plus, &ds).unwrap().row(1).transpose();
            let gm = n.jacobian(&minus, &ds).unwrap().row(1).transpose();
            let col = (gp - gm) / (2.0 * step);
            assert!((col - h.column(k)).amax() < 1e-8);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn jacobian_fd_property(seed in 0u64..10_000, m in 1usize..6, d in 1usize..5, n in 1usize..6) {
            let ds = gaussian_dataset(n, d, seed);
            let model = net(m, d, seed + 1);
            let w = gaussian_params(m * d, seed + 2);
            let analytic = model.jacobian(&w, &ds).unwrap();
            let fd = fd_jacobian(&model, &w, &ds, 1e-5);
            prop_assert!(max_rel_err(&analytic, &fd) <= 1e-5);
        }

        #[test]
        fn jacobian_row_norm_bound(seed in 0u64..10_000, m in 1usize..8, d in 1usize..5) {
            // ‖J_i‖² ≤ (‖x_i‖²/m) ‖c‖² since |tanh'| ≤ 1
            let ds = gaussian_dataset(4, d, seed);
            let model = net(m, d, seed + 1);
            let w = gaussian_params(m * d, seed + 2);
            let jac = model.jacobian(&w, &ds).unwrap();
            let c2 = model.coefficients().norm_squared();
            for i in 0..4 {
                let bound = ds.input(i).norm_squared() / m as f64 * c2;
                prop_assert!(jac.row(i).norm_squared() <= bound * (1.0 + 1e-12));
            }
        }
    }
}
