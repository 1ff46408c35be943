use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DEFAULT_DENSE_CAP;

/// How the diffusion coefficient `Σ^{1/2} dW` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `(1/√n) Σ_i (u_i − ū) ξ_i` with `ξ ∈ ℝ^n`; never forms a `p × p` matrix.
    #[default]
    Factor,
    /// Explicit covariance and its PSD square root, `ξ ∈ ℝ^p`. Small `p` only.
    DenseSqrt,
    /// Deterministic gradient flow.
    None,
}

impl NoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            NoiseMode::Factor => "factor",
            NoiseMode::DenseSqrt => "dense_sqrt",
            NoiseMode::None => "none",
        }
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "factor" => Ok(NoiseMode::Factor),
            "dense_sqrt" => Ok(NoiseMode::DenseSqrt),
            "none" => Ok(NoiseMode::None),
            other => Err(Error::Config(format!("unknown noise mode '{other}'"))),
        }
    }
}

/// Which per-sample gradients the noise covariance is built from.
///
/// `Pullback` uses `u_i = Dh_iᵀ ∇_h ℓ(x_i, αh)`, the vectors whose centered
/// spread defines the single-sample SGD deviation; function-space noise is
/// then independent of `α`. `Parameter` uses the full parameter gradients
/// `g_i = α u_i`, which makes the noise grow linearly with `α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    #[default]
    Pullback,
    Parameter,
}

impl NoiseConvention {
    pub fn name(self) -> &'static str {
        match self {
            NoiseConvention::Pullback => "pullback",
            NoiseConvention::Parameter => "parameter",
        }
    }

    /// Multiplier applied to the pullback gradients `u_i`.
    pub fn gradient_scale(self, alpha: f64) -> f64 {
        match self {
            NoiseConvention::Pullback => 1.0,
            NoiseConvention::Parameter => alpha,
        }
    }
}

impl fmt::Display for NoiseConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pullback" => Ok(NoiseConvention::Pullback),
            "parameter" => Ok(NoiseConvention::Parameter),
            other => Err(Error::Config(format!("unknown noise convention '{other}'"))),
        }
    }
}

/// Full recipe for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgldConfig {
    /// Output scale α.
    pub alpha: f64,
    /// Noise temperature η_α; also the SGD learning rate.
    pub eta_alpha: f64,
    /// Euler–Maruyama step in time units.
    pub dt: f64,
    /// Final time T.
    pub horizon: f64,
    pub seed: u64,
    pub noise_mode: NoiseMode,
    pub noise_convention: NoiseConvention,
    /// Steps between recorded rows.
    pub record_every: usize,
    /// Steps between NTK eigenvalue evaluations on the record grid; 0 disables
    /// all but the initial one.
    pub lambda_every: usize,
    /// Largest `p` accepted by `dense_sqrt`.
    pub dense_cap: usize,
}

impl Default for SgldConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            eta_alpha: 1e-2,
            dt: 1e-2,
            horizon: 50.0,
            seed: 0,
            noise_mode: NoiseMode::Factor,
            noise_convention: NoiseConvention::Pullback,
            record_every: 10,
            lambda_every: 0,
            dense_cap: DEFAULT_DENSE_CAP,
        }
    }
}

impl SgldConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("eta_alpha", self.eta_alpha)?;
        positive("dt", self.dt)?;
        positive("horizon", self.horizon)?;
        if self.dt >= self.horizon {
            return Err(Error::Config(format!(
                "dt ({}) must be smaller than the horizon ({})",
                self.dt, self.horizon
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }

    /// Validation plus the dense-mode capacity guard for a model with `p`
    /// parameters.
    pub fn validate_for(&self, p: usize) -> Result<()> {
        self.validate()?;
        if self.noise_mode == NoiseMode::DenseSqrt && p > self.dense_cap {
            return Err(Error::Capacity {
                requested: p,
                cap: self.dense_cap,
            });
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    /// Copy with the stream seed of Monte Carlo trial `trial`.
    pub fn for_trial(&self, trial: u64) -> Self {
        Self {
            seed: self.seed.wrapping_add(trial),
            ..self.clone()
        }
    }
}
