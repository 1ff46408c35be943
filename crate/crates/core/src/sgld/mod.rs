//! Integrators for the scaled Langevin dynamics and its discrete SGD
//! counterpart, gradient-noise sampling, and the exponential martingale.
//!
//! One step of size `dt` maps
//!
//! ```text
//! ω ← ω − (dt/α) Dhᵀ ∇R(αh) + (√η/α) √dt Σ^{1/2} ξ
//! ```
//!
//! with a fresh standard normal `ξ` shared by the trajectory, its martingale
//! tracker and, when coupled, the linearized twin.

mod config;
mod martingale;
mod noise;
mod run;
mod step;

pub use config::{NoiseConvention, NoiseMode, SgldConfig};
pub use martingale::{advance_martingale, scale_integrand, MartingaleState};
pub use noise::{draw_standard, sample_noise, NoiseFactor, NoiseSample};
pub use run::{run_trajectory, RunOptions, Trajectory};
pub use step::{em_step, linearized_em_step, sgd_step, StepEval};
