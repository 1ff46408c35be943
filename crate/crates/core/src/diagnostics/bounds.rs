//! Closed-form convergence, exit and coupling bounds.
//!
//! Every evaluator takes the strong-convexity constant `mu`, the gradient
//! Lipschitz constant `lip_grad` and `lambda_sq` explicitly; which numbers are
//! fed in is decided by a [`NormConvention`] and a [`LambdaConvention`], and
//! [`BoundReport`] keeps the tags next to each value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::NormConvention;

/// How the smallest Gram eigenvalue maps to the `λ` of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaConvention {
    /// `λ² = λ_min(Dh Dhᵀ)`; the rate-relevant reading.
    #[default]
    EigIsLambdaSq,
    /// `λ = λ_min(Dh Dhᵀ)`, so `λ² = λ_min²`.
    EigIsLambda,
}

impl LambdaConvention {
    pub fn name(self) -> &'static str {
        match self {
            LambdaConvention::EigIsLambdaSq => "eig_is_lambda_sq",
            LambdaConvention::EigIsLambda => "eig_is_lambda",
        }
    }

    pub fn all() -> [LambdaConvention; 2] {
        [LambdaConvention::EigIsLambdaSq, LambdaConvention::EigIsLambda]
    }

    pub fn lambda_sq(self, gram_min_eig: f64) -> f64 {
        match self {
            LambdaConvention::EigIsLambdaSq => gram_min_eig,
            LambdaConvention::EigIsLambda => gram_min_eig * gram_min_eig,
        }
    }

    pub fn lambda(self, gram_min_eig: f64) -> f64 {
        match self {
            LambdaConvention::EigIsLambdaSq => gram_min_eig.max(0.0).sqrt(),
            LambdaConvention::EigIsLambda => gram_min_eig,
        }
    }
}

impl fmt::Display for LambdaConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LambdaConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eig_is_lambda_sq" => Ok(LambdaConvention::EigIsLambdaSq),
            "eig_is_lambda" => Ok(LambdaConvention::EigIsLambda),
            other => Err(Error::Config(format!("unknown lambda convention '{other}'"))),
        }
    }
}

/// Expected optimality gap before exit: `gap0 · exp(−2 μ λ² t)`.
pub fn gap_decay_bound(gap0: f64, mu: f64, lambda_sq: f64, t: f64) -> f64 {
    gap0 * (-2.0 * mu * lambda_sq * t).exp()
}

/// Expected squared output error: `(Lip/μ) ‖αh(ω₀) − h⋆‖² exp(−2 μ λ² t)`.
pub fn output_error_bound(lip_grad: f64, mu: f64, hstar_norm_sq: f64, lambda_sq: f64, t: f64) -> f64 {
    lip_grad / mu * hstar_norm_sq * (-2.0 * mu * lambda_sq * t).exp()
}

/// Probability of ever leaving the lazy ball:
/// `‖Dh(ω₀)‖_F Lip √(Lip ‖h⋆‖²) / (α r μ^{3/2} λ²)`. Values above one are
/// vacuous and reported as such, never clipped.
pub fn exit_probability_bound(
    alpha: f64,
    r: f64,
    frob_dh0: f64,
    lip_grad: f64,
    mu: f64,
    hstar_norm_sq: f64,
    lambda_sq: f64,
) -> f64 {
    frob_dh0 * lip_grad * (lip_grad * hstar_norm_sq).sqrt() / (mu.powf(1.5) * lambda_sq) / (alpha * r)
}

/// Expected output distance between the full and linearized dynamics:
/// `2 √(Lip/μ) ‖h⋆‖ exp(−μ λ² t)`.
pub fn coupling_bound(lip_grad: f64, mu: f64, hstar_norm: f64, lambda_sq: f64, t: f64) -> f64 {
    2.0 * (lip_grad / mu).sqrt() * hstar_norm * (-mu * lambda_sq * t).exp()
}

/// Reference decay `gap0 · exp(−λ t)` drawn next to the loss curves, with
/// `λ` the smallest Gram eigenvalue at initialization.
pub fn reference_decay(gap0: f64, lambda_min_init: f64, t: f64) -> f64 {
    gap0 * (-lambda_min_init * t).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionTag {
    pub norm: NormConvention,
    pub lambda: LambdaConvention,
}

/// One evaluated bound next to what was observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub inputs: BTreeMap<String, f64>,
    pub value: f64,
    pub observed: Option<f64>,
    pub satisfied: Option<bool>,
    pub convention: Option<ConventionTag>,
    /// Probability bounds at or above one carry no information.
    #[serde(default)]
    pub vacuous: bool,
}

impl BoundEntry {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            inputs: BTreeMap::new(),
            value,
            observed: None,
            satisfied: None,
            convention: None,
            vacuous: false,
        }
    }

    pub fn input(mut self, key: &str, v: f64) -> Self {
        self.inputs.insert(key.to_string(), v);
        self
    }

    pub fn conventions(mut self, norm: NormConvention, lambda: LambdaConvention) -> Self {
        self.convention = Some(ConventionTag { norm, lambda });
        self
    }

    /// Records `observed` and whether it stays below `value` (times `slack`).
    pub fn observe_upper(mut self, observed: f64, slack: f64) -> Self {
        self.observed = Some(observed);
        self.satisfied = Some(observed <= self.value * slack);
        self
    }

    pub fn probability(mut self) -> Self {
        self.vacuous = self.value >= 1.0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
}

impl BoundReport {
    pub fn push(&mut self, entry: BoundEntry) {
        self.entries.push(entry);
    }

    pub fn find<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a BoundEntry> + 'a {
        self.entries.iter().filter(move |e| e.name == name)
    }

    /// False if any entry with a verdict failed.
    pub fn all_satisfied(&self) -> bool {
        self.entries.iter().all(|e| e.satisfied != Some(false))
    }
}

/// Inputs shared by the bound family for one (dataset, initialization) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: usize,
    pub alpha: f64,
    pub gram_min_eig: f64,
    pub lip_dh: f64,
    pub frob_dh0: f64,
    pub hstar_norm_sq: f64,
    pub gap0: f64,
}

/// Evaluates every bound under every convention pair at time `t`, without
/// observations.
pub fn evaluate_all(inputs: &BoundInputs, t: f64) -> BoundReport {
    let mut report = BoundReport::default();
    for norm in NormConvention::all() {
        let mu = norm.mu(inputs.n);
        let lip = norm.lip_grad(inputs.n);
        for lc in LambdaConvention::all() {
            let lsq = lc.lambda_sq(inputs.gram_min_eig);
            let r = lc.lambda(inputs.gram_min_eig) / inputs.lip_dh;
            let tag = |e: BoundEntry| e.conventions(norm, lc).input("t", t);
            report.push(tag(BoundEntry::new("gap_decay", gap_decay_bound(inputs.gap0, mu, lsq, t))
                .input("gap0", inputs.gap0)
                .input("mu", mu)
                .input("lambda_sq", lsq)));
            report.push(tag(BoundEntry::new(
                "output_error",
                output_error_bound(lip, mu, inputs.hstar_norm_sq, lsq, t),
            )
            .input("lip_grad", lip)
            .input("mu", mu)
            .input("hstar_norm_sq", inputs.hstar_norm_sq)
            .input("lambda_sq", lsq)));
            report.push(
                tag(BoundEntry::new(
                    "exit_probability",
                    exit_probability_bound(inputs.alpha, r, inputs.frob_dh0, lip, mu, inputs.hstar_norm_sq, lsq),
                )
                .input("alpha", inputs.alpha)
                .input("r", r)
                .input("frob_dh0", inputs.frob_dh0)
                .input("lip_grad", lip)
                .input("mu", mu)
                .input("hstar_norm_sq", inputs.hstar_norm_sq)
                .input("lambda_sq", lsq))
                .probability(),
            );
            report.push(tag(BoundEntry::new(
                "linearization_coupling",
                coupling_bound(lip, mu, inputs.hstar_norm_sq.sqrt(), lsq, t),
            )
            .input("lip_grad", lip)
            .input("mu", mu)
            .input("hstar_norm", inputs.hstar_norm_sq.sqrt())
            .input("lambda_sq", lsq)));
        }
    }
    report
}
