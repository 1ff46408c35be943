//! Flat `key = value` experiment configuration.
//!
//! One file covers data generation, the student network, the integrator and
//! the sweep grid. `#` starts a comment; unknown keys are errors.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::NormConvention;
use crate::model::{Activation, DEFAULT_DENSE_CAP};
use crate::sgld::{NoiseConvention, NoiseMode, SgldConfig};

use super::teacher::TeacherConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Shallow,
    Deep,
}

/// How `h(ω₀) = 0` is achieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Gaussian `ω₀`, output shifted by `h(ω₀)`.
    Centered,
    /// Paired hidden units with mirrored rows and opposite output signs.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    // data
    pub input_dim: usize,
    pub teacher_width: usize,
    pub n_samples: usize,
    pub c_star: f64,
    pub label_noise: f64,
    pub data_seed: u64,
    pub heldout_n: usize,
    // student
    pub model: ModelKind,
    pub width: usize,
    pub depth: usize,
    pub activation: Activation,
    pub init: InitScheme,
    pub init_seed: u64,
    /// Per-layer radius factor `R` of the layered exit test; 0 disables it.
    pub layer_radius: f64,
    // integrator
    pub sgld: SgldConfig,
    // sweep and Monte Carlo
    pub alphas: Vec<f64>,
    pub seeds: usize,
    pub trials: usize,
    pub stop_at_exit: bool,
    pub norm_convention: NormConvention,
    pub hessian_points: usize,
    pub lipschitz_pairs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

struct KeyDoc {
    key: &'static str,
    doc: &'static str,
}

const KEYS: &[KeyDoc] = &[
    KeyDoc { key: "input_dim", doc: "input dimension d" },
    KeyDoc { key: "teacher_width", doc: "hidden units of the teacher" },
    KeyDoc { key: "n_samples", doc: "training samples n" },
    KeyDoc { key: "c_star", doc: "teacher output weight" },
    KeyDoc { key: "label_noise", doc: "standard deviation of the label noise" },
    KeyDoc { key: "data_seed", doc: "seed of inputs, teacher and label noise" },
    KeyDoc { key: "heldout_n", doc: "fresh teacher samples for held-out error (0 = off)" },
    KeyDoc { key: "model", doc: "shallow | deep" },
    KeyDoc { key: "width", doc: "student width m" },
    KeyDoc { key: "depth", doc: "hidden layers of the deep student" },
    KeyDoc { key: "activation", doc: "deep student activation: tanh | softplus" },
    KeyDoc { key: "init", doc: "centered | symmetric" },
    KeyDoc { key: "init_seed", doc: "seed of the student initialization (seed s adds s)" },
    KeyDoc { key: "layer_radius", doc: "per-layer exit radius factor R for deep students (0 = off)" },
    KeyDoc { key: "alpha", doc: "output scale for single runs" },
    KeyDoc { key: "eta_alpha", doc: "noise temperature" },
    KeyDoc { key: "dt", doc: "Euler-Maruyama step" },
    KeyDoc { key: "horizon", doc: "final time" },
    KeyDoc { key: "seed", doc: "noise stream seed (trial k adds k)" },
    KeyDoc { key: "noise_mode", doc: "factor | dense_sqrt | none" },
    KeyDoc { key: "noise_convention", doc: "pullback | parameter" },
    KeyDoc { key: "record_every", doc: "steps between recorded rows" },
    KeyDoc { key: "lambda_every", doc: "steps between NTK eigenvalue evaluations (0 = initial only)" },
    KeyDoc { key: "dense_cap", doc: "largest parameter count for dense matrices" },
    KeyDoc { key: "alphas", doc: "comma-separated sweep grid" },
    KeyDoc { key: "seeds", doc: "initializations per alpha in a sweep" },
    KeyDoc { key: "trials", doc: "Monte Carlo trajectories per alpha" },
    KeyDoc { key: "stop_at_exit", doc: "stop sweep trajectories at the first exit" },
    KeyDoc { key: "norm_convention", doc: "per_sample | averaged" },
    KeyDoc { key: "hessian_points", doc: "dense Hessian samples in verify (0 = skip)" },
    KeyDoc { key: "lipschitz_pairs", doc: "sampled Jacobian quotient pairs in verify" },
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{value}': {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got '{value}'"))),
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Small default that runs in seconds per trajectory: d=8, m=200, n=200,
    /// horizon 50.
    pub fn desk() -> Self {
        Self {
            input_dim: 8,
            teacher_width: 1,
            n_samples: 200,
            c_star: 1.0,
            label_noise: 1.0,
            data_seed: 0,
            heldout_n: 0,
            model: ModelKind::Shallow,
            width: 200,
            depth: 1,
            activation: Activation::Tanh,
            init: InitScheme::Centered,
            init_seed: 1,
            layer_radius: 0.0,
            sgld: SgldConfig {
                alpha: 8.0,
                eta_alpha: 1e-2,
                dt: 1e-2,
                horizon: 50.0,
                seed: 0,
                noise_mode: NoiseMode::Factor,
                noise_convention: NoiseConvention::Pullback,
                record_every: 10,
                lambda_every: 500,
                dense_cap: DEFAULT_DENSE_CAP,
            },
            alphas: vec![0.125, 8.0, 32.0, 256.0],
            seeds: 2,
            trials: 100,
            stop_at_exit: false,
            norm_convention: NormConvention::Averaged,
            hessian_points: 2,
            lipschitz_pairs: 200,
        }
    }

    /// The full-size teacher–student setup: d=16, m=600, one teacher unit,
    /// n=800.
    pub fn full_scale() -> Self {
        let mut c = Self::desk();
        c.input_dim = 16;
        c.width = 600;
        c.n_samples = 800;
        c.teacher_width = 1;
        c.sgld.lambda_every = 1000;
        c.sgld.record_every = 10;
        c.hessian_points = 0;
        c.seeds = 5;
        c
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "input_dim" => self.input_dim = parse(key, v)?,
            "teacher_width" => self.teacher_width = parse(key, v)?,
            "n_samples" => self.n_samples = parse(key, v)?,
            "c_star" => self.c_star = parse(key, v)?,
            "label_noise" => self.label_noise = parse(key, v)?,
            "data_seed" => self.data_seed = parse(key, v)?,
            "heldout_n" => self.heldout_n = parse(key, v)?,
            "model" => {
                self.model = match v {
                    "shallow" => ModelKind::Shallow,
                    "deep" => ModelKind::Deep,
                    _ => return Err(Error::Config(format!("model: expected shallow or deep, got '{v}'"))),
                }
            }
            "width" => self.width = parse(key, v)?,
            "depth" => self.depth = parse(key, v)?,
            "activation" => {
                self.activation = match v {
                    "tanh" => Activation::Tanh,
                    "softplus" => Activation::Softplus,
                    _ => return Err(Error::Config(format!("activation: unknown '{v}'"))),
                }
            }
            "init" => {
                self.init = match v {
                    "centered" => InitScheme::Centered,
                    "symmetric" => InitScheme::Symmetric,
                    _ => return Err(Error::Config(format!("init: expected centered or symmetric, got '{v}'"))),
                }
            }
            "init_seed" => self.init_seed = parse(key, v)?,
            "layer_radius" => self.layer_radius = parse(key, v)?,
            "alpha" => self.sgld.alpha = parse(key, v)?,
            "eta_alpha" => self.sgld.eta_alpha = parse(key, v)?,
            "dt" => self.sgld.dt = parse(key, v)?,
            "horizon" => self.sgld.horizon = parse(key, v)?,
            "seed" => self.sgld.seed = parse(key, v)?,
            "noise_mode" => self.sgld.noise_mode = v.parse()?,
            "noise_convention" => self.sgld.noise_convention = v.parse()?,
            "record_every" => self.sgld.record_every = parse(key, v)?,
            "lambda_every" => self.sgld.lambda_every = parse(key, v)?,
            "dense_cap" => self.sgld.dense_cap = parse(key, v)?,
            "alphas" => {
                self.alphas = v
                    .split(',')
                    .map(|s| parse::<f64>(key, s.trim()))
                    .collect::<Result<Vec<_>>>()?
            }
            "seeds" => self.seeds = parse(key, v)?,
            "trials" => self.trials = parse(key, v)?,
            "stop_at_exit" => self.stop_at_exit = parse_bool(key, v)?,
            "norm_convention" => self.norm_convention = v.parse()?,
            "hessian_points" => self.hessian_points = parse(key, v)?,
            "lipschitz_pairs" => self.lipschitz_pairs = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Current value of `key`, formatted so that `set` reads it back.
    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.sgld;
        Some(match key {
            "input_dim" => self.input_dim.to_string(),
            "teacher_width" => self.teacher_width.to_string(),
            "n_samples" => self.n_samples.to_string(),
            "c_star" => self.c_star.to_string(),
            "label_noise" => self.label_noise.to_string(),
            "data_seed" => self.data_seed.to_string(),
            "heldout_n" => self.heldout_n.to_string(),
            "model" => match self.model {
                ModelKind::Shallow => "shallow".into(),
                ModelKind::Deep => "deep".into(),
            },
            "width" => self.width.to_string(),
            "depth" => self.depth.to_string(),
            "activation" => match self.activation {
                Activation::Tanh => "tanh".into(),
                Activation::Softplus => "softplus".into(),
            },
            "init" => match self.init {
                InitScheme::Centered => "centered".into(),
                InitScheme::Symmetric => "symmetric".into(),
            },
            "init_seed" => self.init_seed.to_string(),
            "layer_radius" => self.layer_radius.to_string(),
            "alpha" => s.alpha.to_string(),
            "eta_alpha" => s.eta_alpha.to_string(),
            "dt" => s.dt.to_string(),
            "horizon" => s.horizon.to_string(),
            "seed" => s.seed.to_string(),
            "noise_mode" => s.noise_mode.name().into(),
            "noise_convention" => s.noise_convention.name().into(),
            "record_every" => s.record_every.to_string(),
            "lambda_every" => s.lambda_every.to_string(),
            "dense_cap" => s.dense_cap.to_string(),
            "alphas" => fmt_list(&self.alphas),
            "seeds" => self.seeds.to_string(),
            "trials" => self.trials.to_string(),
            "stop_at_exit" => self.stop_at_exit.to_string(),
            "norm_convention" => self.norm_convention.name().into(),
            "hessian_points" => self.hessian_points.to_string(),
            "lipschitz_pairs" => self.lipschitz_pairs.to_string(),
            _ => return None,
        })
    }

    /// Every key in documentation order.
    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|k| k.key)
    }

    /// `key = default  # doc` lines for help output.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let v = self.get(k.key).unwrap_or_default();
            let _ = writeln!(out, "  {:<18} = {:<24} # {}", k.key, v, k.doc);
        }
        out
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies one `KEY=VALUE` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{kv}' is not KEY=VALUE")))?;
        self.set(k, v)
    }

    /// Serializes every key, one per line, in a form `apply_text` accepts.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{} = {}\n", k.key, self.get(k.key).unwrap_or_default()))
            .collect()
    }

    pub fn teacher(&self) -> TeacherConfig {
        TeacherConfig {
            input_dim: self.input_dim,
            teacher_width: self.teacher_width,
            n_samples: self.n_samples,
            data_seed: self.data_seed,
            c_star: self.c_star,
            label_noise: self.label_noise,
        }
    }

    /// Integrator settings for one sweep cell: output scale `alpha`, noise
    /// stream `seed + s`.
    pub fn cell_sgld(&self, alpha: f64, s: u64) -> SgldConfig {
        SgldConfig {
            alpha,
            seed: self.sgld.seed.wrapping_add(s),
            ..self.sgld.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonzero = |name: &str, v: usize| {
            if v == 0 {
                Err(Error::Config(format!("{name} must be positive")))
            } else {
                Ok(())
            }
        };
        nonzero("input_dim", self.input_dim)?;
        nonzero("teacher_width", self.teacher_width)?;
        nonzero("n_samples", self.n_samples)?;
        nonzero("width", self.width)?;
        nonzero("depth", self.depth)?;
        nonzero("seeds", self.seeds)?;
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::Config("alphas must be a nonempty list of positive numbers".into()));
        }
        if self.init == InitScheme::Symmetric && (self.model != ModelKind::Shallow || !self.width.is_multiple_of(2)) {
            return Err(Error::Config("symmetric init needs a shallow student with even width".into()));
        }
        if self.label_noise.is_nan() || self.label_noise < 0.0 || !self.c_star.is_finite() {
            return Err(Error::Config("label_noise must be >= 0 and c_star finite".into()));
        }
        if self.layer_radius.is_nan() || self.layer_radius < 0.0 {
            return Err(Error::Config("layer_radius must be >= 0".into()));
        }
        self.sgld.validate()
    }
}
