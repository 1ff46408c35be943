use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Supervised training set: `n` inputs in `ℝ^d` (rows of `inputs`) and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: DMatrix<f64>,
    targets: DVector<f64>,
    fingerprint: u64,
}

impl Dataset {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(Error::InvalidArgument("dataset must be nonempty".into()));
        }
        if targets.len() != inputs.nrows() {
            return Err(Error::dim("dataset targets", inputs.nrows(), targets.len()));
        }
        let fingerprint = fingerprint(&inputs);
        Ok(Self {
            inputs,
            targets,
            fingerprint,
        })
    }

    /// Builds a dataset from row-major input rows.
    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidArgument("ragged input rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(n, d, &flat), DVector::from_vec(targets))
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// `n × d` input matrix, one sample per row.
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn input(&self, i: usize) -> DVector<f64> {
        self.inputs.row(i).transpose()
    }

    /// Hash of the input bits; identifies the dataset for cached quantities.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Same inputs, replaced targets.
    pub fn with_targets(&self, targets: DVector<f64>) -> Result<Self> {
        Self::new(self.inputs.clone(), targets)
    }

    pub fn max_sq_norm(&self) -> f64 {
        self.inputs
            .row_iter()
            .map(|r| r.norm_squared())
            .fold(0.0, f64::max)
    }

    /// `Σ_i ‖x_i‖²`, the squared Frobenius norm of the input matrix.
    pub fn total_sq_norm(&self) -> f64 {
        self.inputs.norm_squared()
    }
}

fn fingerprint(inputs: &DMatrix<f64>) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    inputs.nrows().hash(&mut h);
    inputs.ncols().hash(&mut h);
    for v in inputs.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}
