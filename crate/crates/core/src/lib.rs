//! Numerical laboratory for scaled stochastic gradient Langevin dynamics (SGLD)
//! in the lazy training regime.
//!
//! The crate simulates
//!
//! ```text
//! dω = -(1/α) Dhᵀ(ω) ∇R(α h(ω)) dt + (√η/α) Σ(ω)^{1/2} dW
//! ```
//!
//! and its single-sample SGD counterpart on shallow and deep networks, tracks
//! the empirical NTK spectrum and first-exit times from the lazy ball, and
//! checks the closed-form convergence and exit bounds against Monte Carlo.
//!
//! Module map:
//! - [`model`]: predictors with analytic Jacobians and small dense Hessians.
//! - [`loss`]: squared loss, empirical risk and its regularity constants.
//! - [`ntk`]: Gram matrices, minimum eigenvalues, lazy radius.
//! - [`sgld`]: Euler–Maruyama / SGD / linearized integrators, noise, martingale.
//! - [`diagnostics`]: trajectory records, exit detection, bound evaluators.
//! - [`assumptions`]: verifiers for the regularity hypotheses.
//! - [`experiments`]: teacher–student data, configs, α-sweeps.

pub mod assumptions;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod loss;
pub mod model;
pub mod ntk;
pub mod sgld;

pub use data::Dataset;
pub use error::{Error, Result};
pub use loss::{NormConvention, RiskValue, SquaredLoss};
pub use model::{
    CenteredPredictor, DeepNet, LinearizedPredictor, ParamVector, Predictor, ShallowTanhNet,
};
pub use ntk::{LazyRadius, NtkGram};
pub use sgld::{MartingaleState, NoiseMode, SgldConfig};
