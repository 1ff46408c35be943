//! Squared-error loss, empirical risk, and the regularity constants the bound
//! evaluators consume.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `ℓ(x, h) = (y − h(x))²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquaredLoss;

impl SquaredLoss {
    /// Strong convexity constant of `h ↦ ℓ(x, h)`.
    pub const MU_STRONG: f64 = 2.0;
    /// Lipschitz modulus of `h ↦ ∇_h ℓ(x, h)`.
    pub const LIP_GRAD: f64 = 2.0;

    pub fn value(&self, h: f64, y: f64) -> f64 {
        (y - h) * (y - h)
    }

    pub fn derivative(&self, h: f64, y: f64) -> f64 {
        2.0 * (h - y)
    }

    pub fn second_derivative(&self) -> f64 {
        2.0
    }
}

/// How the per-sample constants transfer to the averaged risk on `ℝ^n`.
///
/// `PerSample` uses `μ = Lip = 2` directly. `Averaged` uses the constants of
/// `R(h) = (1/n) Σ ℓ_i` with respect to the Euclidean norm, `μ = Lip = 2/n`;
/// under it the Polyak–Łojasiewicz ratio of the squared loss is exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NormConvention {
    PerSample,
    #[default]
    Averaged,
}

impl NormConvention {
    pub fn mu(self, n: usize) -> f64 {
        match self {
            NormConvention::PerSample => SquaredLoss::MU_STRONG,
            NormConvention::Averaged => SquaredLoss::MU_STRONG / n as f64,
        }
    }

    pub fn lip_grad(self, n: usize) -> f64 {
        match self {
            NormConvention::PerSample => SquaredLoss::LIP_GRAD,
            NormConvention::Averaged => SquaredLoss::LIP_GRAD / n as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormConvention::PerSample => "per_sample",
            NormConvention::Averaged => "averaged",
        }
    }

    pub fn all() -> [NormConvention; 2] {
        [NormConvention::Averaged, NormConvention::PerSample]
    }
}

impl std::str::FromStr for NormConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_sample" => Ok(NormConvention::PerSample),
            "averaged" => Ok(NormConvention::Averaged),
            other => Err(Error::Config(format!("unknown norm convention '{other}'"))),
        }
    }
}

/// Empirical risk and its optimality gap.
///
/// The unconstrained minimizer over `ℝ^n` interpolates the targets, so the
/// minimal risk is zero and `gap == risk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskValue {
    pub risk: f64,
    pub gap: f64,
}

fn check_lengths(outputs: &DVector<f64>, targets: &DVector<f64>) -> Result<()> {
    if outputs.is_empty() {
        return Err(Error::InvalidArgument("empty output vector".into()));
    }
    if outputs.len() != targets.len() {
        return Err(Error::dim("outputs vs targets", targets.len(), outputs.len()));
    }
    Ok(())
}

/// `R = (1/n) Σ (y_i − o_i)²`.
pub fn empirical_risk(outputs: &DVector<f64>, targets: &DVector<f64>) -> Result<RiskValue> {
    check_lengths(outputs, targets)?;
    let risk = (outputs - targets).norm_squared() / outputs.len() as f64;
    Ok(RiskValue { risk, gap: risk })
}

/// `∇R = (2/n)(o − y)`.
pub fn risk_gradient(outputs: &DVector<f64>, targets: &DVector<f64>) -> Result<DVector<f64>> {
    check_lengths(outputs, targets)?;
    Ok((outputs - targets) * (2.0 / outputs.len() as f64))
}

/// Polyak–Łojasiewicz ratio `‖∇R‖² / (2 μ R̄)`.
pub fn pl_ratio(
    outputs: &DVector<f64>,
    targets: &DVector<f64>,
    convention: NormConvention,
) -> Result<f64> {
    let RiskValue { gap, .. } = empirical_risk(outputs, targets)?;
    if gap <= 0.0 {
        return Err(Error::ZeroGap);
    }
    let grad = risk_gradient(outputs, targets)?;
    Ok(grad.norm_squared() / (2.0 * convention.mu(outputs.len()) * gap))
}
