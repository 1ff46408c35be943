//! Student networks and the quantities measured at their initialization.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InitScheme, ModelKind};
use crate::assumptions::{curvature_bound, curvature_bound_centered, lip_dh_shallow};
use crate::data::Dataset;
use crate::diagnostics::BoundInputs;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CenteredPredictor, DeepNet, ParamVector, Predictor, ShallowTanhNet};
use crate::ntk::{lazy_radius, LazyRadius};

/// A trainable model together with its starting point.
pub struct Student {
    pub model: Box<dyn Predictor>,
    pub origin: ParamVector,
    /// The bare shallow network, kept for the closed-form constants.
    pub shallow: Option<ShallowTanhNet>,
    /// Width of the layered model, for per-layer radii.
    pub deep_width: Option<usize>,
    /// `model` subtracts the initial outputs.
    pub centered: bool,
}

impl Student {
    /// Bare shallow outputs at `ω₀` when the trained model is centered.
    pub fn shallow_offset(&self, data: &Dataset) -> Result<Option<DVector<f64>>> {
        match (&self.shallow, self.centered) {
            (Some(net), true) => Ok(Some(net.predict(&self.origin, data)?)),
            _ => Ok(None),
        }
    }

    /// Closed-form curvature cap of the trained risk; shallow students only.
    pub fn curvature_bound(&self, alpha: f64, data: &Dataset) -> Result<Option<f64>> {
        let Some(net) = &self.shallow else { return Ok(None) };
        let c = net.coefficients();
        Ok(Some(match self.shallow_offset(data)? {
            Some(h0) => curvature_bound_centered(alpha, c, data, &h0),
            None => curvature_bound(alpha, c, data),
        }))
    }
}

/// Alternating `+1, −1, …` output signs.
pub fn alternating_signs(m: usize) -> DVector<f64> {
    DVector::from_fn(m, |j, _| if j % 2 == 0 { 1.0 } else { -1.0 })
}

fn gaussian(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Student for seed index `s`: the init stream is `init_seed + s`.
pub fn build_student(cfg: &ExperimentConfig, s: u64) -> Result<Student> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.init_seed.wrapping_add(s));
    let (m, d) = (cfg.width, cfg.input_dim);
    match (cfg.model, cfg.init) {
        (ModelKind::Shallow, InitScheme::Centered) => {
            let net = ShallowTanhNet::new(m, d, alternating_signs(m))?;
            let origin = ParamVector::from_vec(gaussian(m * d, &mut rng))?;
            Ok(Student {
                model: Box::new(CenteredPredictor::new(net.clone(), origin.clone())?),
                origin,
                shallow: Some(net),
                deep_width: None,
                centered: true,
            })
        }
        (ModelKind::Shallow, InitScheme::Symmetric) => {
            if m % 2 != 0 {
                return Err(Error::Config("symmetric init needs an even width".into()));
            }
            let half = m / 2;
            let c = DVector::from_fn(m, |j, _| if j < half { 1.0 } else { -1.0 });
            let top = gaussian(half * d, &mut rng);
            let mut rows = top.clone();
            rows.extend_from_slice(&top);
            let net = ShallowTanhNet::new(m, d, c)?;
            Ok(Student {
                model: Box::new(net.clone()),
                origin: ParamVector::from_vec(rows)?,
                shallow: Some(net),
                deep_width: None,
                centered: false,
            })
        }
        (ModelKind::Deep, InitScheme::Centered) => {
            let net = DeepNet::new(cfg.depth, m, d, cfg.activation)?;
            let origin = ParamVector::from_vec(gaussian(net.num_params(), &mut rng))?;
            Ok(Student {
                model: Box::new(CenteredPredictor::new(net, origin.clone())?),
                origin,
                shallow: None,
                deep_width: Some(m),
                centered: true,
            })
        }
        (ModelKind::Deep, InitScheme::Symmetric) => {
            Err(Error::Config("symmetric init is only available for the shallow student".into()))
        }
    }
}

/// Measurements at `ω₀` shared by every α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitSummary {
    /// Smallest eigenvalue of `K₀ = Dh(ω₀) Dh(ω₀)ᵀ`.
    pub gram_min_eig: f64,
    /// `‖Dh(ω₀)‖_F = √tr K₀`.
    pub frob_dh0: f64,
    /// Closed-form Jacobian Lipschitz constant, shallow students only.
    pub lip_dh: Option<f64>,
    pub radius: Option<LazyRadius>,
    /// `‖y‖²`, the squared norm of the target outputs.
    pub hstar_norm_sq: f64,
    /// Unscaled outputs `h(ω₀)`; zero up to rounding for both init schemes.
    pub initial_outputs: Vec<f64>,
}

impl InitSummary {
    /// `R̄₀ = ‖αh(ω₀) − y‖²/n`.
    pub fn gap0(&self, alpha: f64, data: &Dataset) -> f64 {
        let y = data.targets();
        self.initial_outputs
            .iter()
            .zip(y.iter())
            .map(|(h, y)| (alpha * h - y).powi(2))
            .sum::<f64>()
            / y.len() as f64
    }

    pub fn bound_inputs(&self, alpha: f64, data: &Dataset) -> Option<BoundInputs> {
        Some(BoundInputs {
            n: data.len(),
            alpha,
            gram_min_eig: self.gram_min_eig,
            lip_dh: self.lip_dh?,
            frob_dh0: self.frob_dh0,
            hstar_norm_sq: self.hstar_norm_sq,
            gap0: self.gap0(alpha, data),
        })
    }
}

pub fn analyze_init(student: &Student, data: &Dataset) -> Result<InitSummary> {
    let local = student.model.linearize(&student.origin, data)?;
    let k0 = local.gram();
    let gram_min_eig = linalg::min_symmetric_eigenvalue(&k0);
    let frob_dh0 = k0.trace().max(0.0).sqrt();
    let lip_dh = student.shallow.as_ref().map(|net| lip_dh_shallow(net.coefficients(), data));
    let radius = match lip_dh {
        Some(lip) if gram_min_eig > 0.0 && lip > 0.0 => Some(lazy_radius(gram_min_eig.sqrt(), lip)?),
        _ => None,
    };
    Ok(InitSummary {
        gram_min_eig,
        frob_dh0,
        lip_dh,
        radius,
        hstar_norm_sq: data.targets().norm_squared(),
        initial_outputs: local.outputs().iter().copied().collect(),
    })
}
