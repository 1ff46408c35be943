//! Trajectory records, first-exit detection, closed-form bounds and the
//! Monte Carlo estimators that check them.

mod bounds;
mod exit;
mod montecarlo;
mod record;
pub mod stats;

pub use bounds::{
    coupling_bound, evaluate_all, exit_probability_bound, gap_decay_bound, output_error_bound,
    reference_decay, BoundEntry, BoundInputs, BoundReport, ConventionTag, LambdaConvention,
};
pub use exit::{detect_exit, detect_exit_deep, layer_radius, DeepExitState};
pub use montecarlo::{
    cohort_decomposition, exit_probability_mc, nonincreasing_within_ci, CohortDecomposition,
    CohortSplit, ExitEstimate, TrialOutcome,
};
pub use record::{TrajectoryRecord, CSV_HEADER};
