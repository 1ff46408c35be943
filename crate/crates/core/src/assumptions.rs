//! Checkers for the regularity hypotheses on concrete instances: loss
//! constants, NTK positivity, Lipschitz continuity of the Jacobian and the
//! curvature cap that admits a noise level η.
//!
//! Analytic bounds are paired with numeric witnesses computed independently
//! (dense Hessians, sampled difference quotients).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::loss::{risk_gradient, SquaredLoss};
use crate::model::{dense_parameter_hessian, Activation, ParamVector, Predictor, ShallowTanhNet};
use crate::ntk;

/// η used by the reference experiment.
pub const DEFAULT_ETA: f64 = 1e-2;
/// Smallest NTK eigenvalue accepted as strictly positive.
pub const NTK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionEntry {
    pub id: String,
    pub analytic_bound: f64,
    pub witness: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn push(&mut self, entry: AssumptionEntry) {
        self.entries.push(entry);
    }

    pub fn all_hold(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn get(&self, id: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Lipschitz modulus of `tanh′`, i.e. `sup |tanh″| = 4/(3√3)`.
pub fn tanh_prime_lipschitz() -> f64 {
    Activation::Tanh.smoothness()
}

/// Upper bound on the Frobenius Lipschitz modulus of `ω ↦ Dh(ω)` for the
/// shallow tanh net on `data`:
///
/// `(L′/√m) ‖c‖_∞ √λ_max(Σ_i ‖x_i‖² x_i x_iᵀ)`, `L′ = 4/(3√3)`.
///
/// Each hidden row only moves its own column block, and within a block the
/// change of row `i` is bounded by `L′ |c_j| |Δω_jᵀ x_i| ‖x_i‖ / √m`; summing
/// the squares over samples and rows gives the quadratic form above.
pub fn lip_dh_shallow(c: &DVector<f64>, data: &Dataset) -> f64 {
    let m = c.len() as f64;
    let x = data.inputs();
    let mut weighted = x.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= x.row(i).norm();
    }
    let moment = weighted.tr_mul(&weighted);
    let top = linalg::max_symmetric_eigenvalue(&moment).max(0.0);
    tanh_prime_lipschitz() / m.sqrt() * c.amax() * top.sqrt()
}

/// Block-max envelope `(L′/√m) max_i ‖x_i‖² ‖c‖₂`. Valid for a single
/// sample; with several samples the per-sample moduli add up and this can
/// undercut the true modulus, so it is kept only for comparison.
pub fn lip_dh_shallow_envelope(c: &DVector<f64>, data: &Dataset) -> f64 {
    tanh_prime_lipschitz() / (c.len() as f64).sqrt() * data.max_sq_norm() * c.norm()
}

fn curvature_terms(alpha: f64, c: &DVector<f64>, n: usize, y_inf: f64, x_sq: f64) -> f64 {
    let m = c.len() as f64;
    let n = n as f64;
    let c2 = c.norm_squared();
    let c_inf = c.amax();
    let c1 = c.lp_norm(1);
    alpha * alpha * c2 * x_sq / (m * n)
        + 4.0 * alpha * c_inf / (3.0 * n * (3.0 * m).sqrt()) * (alpha * c1 / m.sqrt() + y_inf) * x_sq
}

/// The closed-form curvature cap exactly as usually printed, with
/// `‖x‖² = max_i ‖x_i‖²`. It omits the factor two of the squared loss's
/// second derivative and is not a valid bound in general (one sample, unit
/// weights: true curvature 2 against 1.7698).
pub fn printed_curvature_bound(alpha: f64, c: &DVector<f64>, data: &Dataset) -> f64 {
    curvature_terms(alpha, c, data.len(), data.targets().amax(), data.max_sq_norm())
}

/// Valid upper bound on `λ_max ∇²_ω R(αφ)` for the shallow tanh net, for all
/// `ω`:
///
/// `2α²‖c‖₂² S/(mn) + 2·4α‖c‖_∞/(3n√(3m)) · (α‖c‖₁/√m + ‖y‖_∞) · S`,
///
/// with `S = Σ_i ‖x_i‖²`. The first term bounds the Gauss–Newton part through
/// `‖J_i‖² ≤ ‖x_i‖²‖c‖²/m`, the second the residual-weighted output Hessians
/// through `|r_i| ≤ α‖c‖₁/√m + ‖y‖_∞`.
pub fn curvature_bound(alpha: f64, c: &DVector<f64>, data: &Dataset) -> f64 {
    2.0 * curvature_terms(alpha, c, data.len(), data.targets().amax(), data.total_sq_norm())
}

/// [`curvature_bound`] for the centered model `h(ω) − h(ω₀)`, whose risk is
/// the plain net's risk against the shifted targets `y + αh(ω₀)`; `‖y‖_∞`
/// becomes `max_i |y_i + αh_i(ω₀)|`.
pub fn curvature_bound_centered(alpha: f64, c: &DVector<f64>, data: &Dataset, initial_outputs: &DVector<f64>) -> f64 {
    let y_inf = data
        .targets()
        .iter()
        .zip(initial_outputs.iter())
        .fold(0.0f64, |acc, (y, h)| acc.max((y + alpha * h).abs()));
    2.0 * curvature_terms(alpha, c, data.len(), y_inf, data.total_sq_norm())
}

/// Largest η with `curvature ≤ α²/η`, i.e. `α²/bound`; `+∞` for a zero bound.
pub fn select_eta(alpha: f64, bound: f64) -> Result<f64> {
    if bound.is_nan() || bound < 0.0 || alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "select_eta needs alpha > 0 and bound >= 0, got {alpha}, {bound}"
        )));
    }
    Ok(if bound == 0.0 { f64::INFINITY } else { alpha * alpha / bound })
}

/// Admissibility of a configured η against the curvature cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaCheck {
    pub alpha: f64,
    pub curvature_bound: f64,
    pub eta_max: f64,
    pub eta: f64,
    pub admissible: bool,
}

pub fn check_eta(alpha: f64, bound: f64, eta: f64) -> Result<EtaCheck> {
    let eta_max = select_eta(alpha, bound)?;
    Ok(EtaCheck {
        alpha,
        curvature_bound: bound,
        eta_max,
        eta,
        admissible: eta <= eta_max,
    })
}

/// Randomized probes of the squared loss: strong convexity and gradient
/// Lipschitz equalities per sample (constant 2) and for the averaged risk on
/// `ℝ^n` (constant 2/n). The witness is the worst relative deviation.
pub fn verify_loss_constants(probes: usize, n: usize, seed: u64) -> Vec<AssumptionEntry> {
    let loss = SquaredLoss;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sc, mut lip) = (0.0f64, 0.0f64);
    let rel = |a: f64, b: f64| if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
    for k in 0..probes {
        let y: f64 = rng.sample(StandardNormal);
        let h1: f64 = rng.sample::<f64, _>(StandardNormal) * 3.0;
        // first probe is the degenerate h1 = h2
        let h2: f64 = if k == 0 { h1 } else { rng.sample::<f64, _>(StandardNormal) * 3.0 };
        let dg = loss.derivative(h1, y) - loss.derivative(h2, y);
        sc = sc.max(rel(dg * (h1 - h2), SquaredLoss::MU_STRONG * (h1 - h2) * (h1 - h2)));
        lip = lip.max(rel(dg.abs(), SquaredLoss::LIP_GRAD * (h1 - h2).abs()));
    }
    let (mut vsc, mut vlip) = (0.0f64, 0.0f64);
    let vec_probes = (probes / 10).max(1);
    let scale = 2.0 / n as f64;
    for _ in 0..vec_probes {
        let mut draw = || DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let (y, h1, h2) = (draw(), draw(), draw());
        let dg = risk_gradient(&h1, &y).expect("equal lengths") - risk_gradient(&h2, &y).expect("equal lengths");
        let dh = &h1 - &h2;
        vsc = vsc.max(rel(dg.dot(&dh), scale * dh.norm_squared()));
        vlip = vlip.max(rel(dg.norm(), scale * dh.norm()));
    }
    let tol = 1e-12;
    let entry = |id: &str, bound: f64, w: f64| AssumptionEntry {
        id: id.into(),
        analytic_bound: bound,
        witness: w,
        holds: w <= tol,
        note: Some(format!("max relative deviation over probes, tolerance {tol:e}")),
    };
    vec![
        entry("loss_strong_convexity", SquaredLoss::MU_STRONG, sc),
        entry("loss_gradient_lipschitz", SquaredLoss::LIP_GRAD, lip),
        entry("risk_strong_convexity_averaged", scale, vsc),
        entry("risk_gradient_lipschitz_averaged", scale, vlip),
    ]
}

/// `λ² = λ_min(Dh Dhᵀ)` at `params`; holds when above `floor`.
pub fn verify_ntk_positive(
    model: &dyn Predictor,
    params: &ParamVector,
    data: &Dataset,
    floor: f64,
) -> Result<AssumptionEntry> {
    let lambda_sq = ntk::model_gram(model, params, data)?.min_eigenvalue();
    Ok(AssumptionEntry {
        id: "ntk_positive".into(),
        analytic_bound: floor,
        witness: lambda_sq,
        holds: lambda_sq > floor,
        note: None,
    })
}

/// Uniform point in the ball of radius `radius` around `center`.
pub fn sample_in_ball<R: Rng + ?Sized>(center: &ParamVector, radius: f64, rng: &mut R) -> ParamVector {
    let p = center.len();
    let dir = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u: f64 = rng.random();
    let rho = radius * u.powf(1.0 / p as f64);
    ParamVector::new(center.as_vector() + dir.normalize() * rho).expect("finite ball sample")
}

/// Largest sampled `‖Dh(ω₁) − Dh(ω₂)‖_F / ‖ω₁ − ω₂‖` over `pairs` random
/// pairs: half inside the ball, half on a shell up to 10% outside it.
pub fn sampled_lipschitz_quotient(
    model: &dyn Predictor,
    center: &ParamVector,
    data: &Dataset,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for k in 0..pairs {
        let r = if k % 2 == 0 { radius } else { radius * 1.1 };
        let a = sample_in_ball(center, r, &mut rng);
        let b = if k % 4 < 2 {
            sample_in_ball(center, r, &mut rng)
        } else {
            // short-range pair: the supremum is approached locally
            sample_in_ball(&a, r * 1e-2, &mut rng)
        };
        let dist = a.distance(&b);
        if dist == 0.0 {
            continue;
        }
        let dj: DMatrix<f64> = model.jacobian(&a, data)? - model.jacobian(&b, data)?;
        worst = worst.max(dj.norm() / dist);
    }
    Ok(worst)
}

/// Worst `λ_max` of the dense parameter Hessian of `ω ↦ R(αh(ω))` over
/// `points` random parameters in the ball.
#[allow(clippy::too_many_arguments)]
pub fn sampled_max_curvature(
    model: &dyn Predictor,
    center: &ParamVector,
    data: &Dataset,
    alpha: f64,
    radius: f64,
    points: usize,
    seed: u64,
    cap: usize,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..points {
        let w = sample_in_ball(center, radius, &mut rng);
        let hess = dense_parameter_hessian(model, &w, data, &SquaredLoss, alpha, cap)?;
        worst = worst.max(linalg::max_symmetric_eigenvalue(&hess));
    }
    Ok(worst)
}

/// Inputs of a full shallow-network verification.
pub struct ShallowCheck<'a> {
    pub net: &'a ShallowTanhNet,
    /// Model actually trained (e.g. the centered wrapper of `net`).
    pub model: &'a dyn Predictor,
    pub origin: &'a ParamVector,
    pub data: &'a Dataset,
    /// `h(ω₀)` of `net` when `model` is its centered wrapper.
    pub initial_outputs: Option<&'a DVector<f64>>,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    /// Quotient pairs for the Jacobian Lipschitz check.
    pub pairs: usize,
    /// Hessian sample points; 0 skips the dense check (large `p`).
    pub hessian_points: usize,
    pub dense_cap: usize,
}

/// Runs every shallow-network check and collects the report. Returns the
/// lazy radius as well, since later stages need it.
pub fn verify_shallow(check: &ShallowCheck<'_>) -> Result<(AssumptionReport, Option<ntk::LazyRadius>)> {
    let mut report = AssumptionReport::default();
    for e in verify_loss_constants(10_000, check.data.len(), check.seed) {
        report.push(e);
    }
    let ntk_entry = verify_ntk_positive(check.model, check.origin, check.data, NTK_FLOOR)?;
    let lambda_sq = ntk_entry.witness;
    report.push(ntk_entry);

    let c = check.net.coefficients();
    let lip = lip_dh_shallow(c, check.data);
    let radius = if lambda_sq > 0.0 && lip > 0.0 {
        Some(ntk::lazy_radius(lambda_sq.sqrt(), lip)?)
    } else {
        None
    };
    let ball = radius.map_or(1.0, |r| r.r);
    let quotient = sampled_lipschitz_quotient(check.model, check.origin, check.data, ball, check.pairs, check.seed ^ 0x11)?;
    report.push(AssumptionEntry {
        id: "jacobian_lipschitz".into(),
        analytic_bound: lip,
        witness: quotient,
        holds: quotient <= lip,
        note: Some(format!("sampled quotient over {} pairs, radius {ball:e}", check.pairs)),
    });

    let bound = match check.initial_outputs {
        Some(h0) => curvature_bound_centered(check.alpha, c, check.data, h0),
        None => curvature_bound(check.alpha, c, check.data),
    };
    if check.hessian_points > 0 {
        let worst = sampled_max_curvature(
            check.model,
            check.origin,
            check.data,
            check.alpha,
            ball,
            check.hessian_points,
            check.seed ^ 0x22,
            check.dense_cap,
        )?;
        report.push(AssumptionEntry {
            id: "curvature_domination".into(),
            analytic_bound: bound,
            witness: worst,
            holds: worst <= bound,
            note: Some(format!("dense Hessian at {} points in the lazy ball", check.hessian_points)),
        });
    }
    let eta = check_eta(check.alpha, bound, check.eta)?;
    report.push(AssumptionEntry {
        id: "eta_admissible".into(),
        analytic_bound: eta.eta_max,
        witness: eta.eta,
        holds: eta.admissible,
        note: Some("eta_max = alpha^2 / curvature_bound".into()),
    });
    Ok((report, radius))
}
