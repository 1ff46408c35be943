//! Teacher–student regression data.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

// xored into the data seed for held-out draws
const HELDOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub input_dim: usize,
    pub teacher_width: usize,
    pub n_samples: usize,
    pub data_seed: u64,
    /// Output weight of every teacher unit.
    pub c_star: f64,
    /// Standard deviation of the additive label noise.
    pub label_noise: f64,
}

/// Teacher `x ↦ Σ_j c⋆ tanh(ω⋆_jᵀ x)`, unscaled by width, with rows
/// `ω⋆_j ~ U[0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Teacher {
    weights: DMatrix<f64>,
    c_star: f64,
    label_noise: f64,
}

impl Teacher {
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn output(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let act = (x * self.weights.transpose()).map(f64::tanh);
        DVector::from_iterator(act.nrows(), act.row_iter().map(|r| r.sum() * self.c_star))
    }

    /// Fresh labelled samples from the teacher, on their own stream.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Dataset> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.weights.ncols();
        let x = DMatrix::from_fn(count, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let clean = self.output(&x);
        let y = DVector::from_fn(count, |i, _| clean[i] + self.label_noise * rng.sample::<f64, _>(StandardNormal));
        Dataset::new(x, y)
    }
}

/// Training data and the teacher that produced it. Training code only ever
/// receives `train`.
#[derive(Debug, Clone)]
pub struct TeacherStudent {
    pub train: Dataset,
    pub teacher: Teacher,
    pub config: TeacherConfig,
}

impl TeacherStudent {
    /// Held-out samples drawn on a stream disjoint from the training one.
    pub fn heldout(&self, count: usize) -> Result<Dataset> {
        self.teacher.sample(count, self.config.data_seed ^ HELDOUT_STREAM)
    }
}

/// Inputs `x_i ~ N(0, I_d)`, targets `y_i = teacher(x_i) + ε_i` with
/// `ε_i ~ N(0, label_noise²)`; a pure function of the config.
pub fn generate_teacher_student(cfg: &TeacherConfig) -> Result<TeacherStudent> {
    if cfg.input_dim == 0 || cfg.teacher_width == 0 || cfg.n_samples == 0 {
        return Err(Error::InvalidArgument("teacher dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let weights = DMatrix::from_fn(cfg.teacher_width, cfg.input_dim, |_, _| rng.sample(unit));
    let teacher = Teacher {
        weights,
        c_star: cfg.c_star,
        label_noise: cfg.label_noise,
    };
    let stream = rng.random::<u64>();
    let train = teacher.sample(cfg.n_samples, stream)?;
    Ok(TeacherStudent {
        train,
        teacher,
        config: *cfg,
    })
}

/// Dataset as CSV with columns `x0..x{d-1},y`.
pub fn dataset_csv(data: &Dataset) -> String {
    let d = data.input_dim();
    let mut out = (0..d).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    out.push_str(",y\n");
    for i in 0..data.len() {
        let row = data.inputs().row(i);
        let mut fields: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        fields.push(fmt_f64(data.targets()[i]));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Reads the CSV written by [`dataset_csv`].
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty dataset file".into()))?;
    let cols = header.split(',').count();
    if cols < 2 || !header.ends_with(",y") {
        return Err(Error::InvalidArgument("dataset header must be x0,...,y".into()));
    }
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidArgument(format!("row {k}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() != cols {
            return Err(Error::InvalidArgument(format!("row {k}: expected {cols} fields")));
        }
        ys.push(vals[cols - 1]);
        rows.push(vals[..cols - 1].to_vec());
    }
    Dataset::from_rows(&rows, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TeacherConfig {
        TeacherConfig {
            input_dim: 16,
            teacher_width: 1,
            n_samples: 50,
            data_seed: 3,
            c_star: 1.0,
            label_noise: 1.0,
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_teacher_student(&cfg()).unwrap();
        let b = generate_teacher_student(&cfg()).unwrap();
        assert_eq!(dataset_csv(&a.train), dataset_csv(&b.train));
        let c = generate_teacher_student(&TeacherConfig { data_seed: 4, ..cfg() }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn silent_teacher_gives_zero_targets() {
        let ts = generate_teacher_student(&TeacherConfig { c_star: 0.0, label_noise: 0.0, ..cfg() }).unwrap();
        assert!(ts.train.targets().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn teacher_weights_in_unit_cube() {
        let ts = generate_teacher_student(&TeacherConfig { teacher_width: 5, ..cfg() }).unwrap();
        assert_eq!(ts.teacher.weights().shape(), (5, 16));
        assert!(ts.teacher.weights().iter().all(|&w| (0.0..1.0).contains(&w)));
    }

    #[test]
    fn target_variance_is_teacher_variance_plus_one() {
        // Oracle: Var(y) = Var(teacher(x)) + 1, with the teacher variance
        // estimated on an independent, noise-free draw.
        let c = TeacherConfig { n_samples: 10_000, ..cfg() };
        let ts = generate_teacher_student(&c).unwrap();
        let y = ts.train.targets();
        let var = |v: &DVector<f64>| {
            let m = v.mean();
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x = DMatrix::from_fn(100_000, 16, |_, _| rng.sample::<f64, _>(StandardNormal));
        let teacher_var = var(&ts.teacher.output(&x));
        let vy = var(y);
        // standard error of a sample variance ≈ √(2/n)·σ² for near-normal data
        let se = (2.0 / 10_000f64).sqrt() * vy;
        assert!((vy - (teacher_var + 1.0)).abs() <= 4.0 * se, "{vy} vs {}", teacher_var + 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let ts = generate_teacher_student(&TeacherConfig { input_dim: 3, n_samples: 7, ..cfg() }).unwrap();
        let back = dataset_from_csv(&dataset_csv(&ts.train)).unwrap();
        assert_eq!(back, ts.train);
        assert!(dataset_from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn heldout_differs_from_train() {
        let ts = generate_teacher_student(&cfg()).unwrap();
        let h = ts.heldout(50).unwrap();
        assert_ne!(h.inputs(), ts.train.inputs());
        assert_eq!(h, ts.heldout(50).unwrap());
    }
}
