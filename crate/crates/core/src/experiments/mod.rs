//! Teacher–student experiments: data, students, single runs, α sweeps,
//! exit Monte Carlo, assumption checks and the full-size reproduction.

mod config;
mod exitprob;
mod reproduction;
mod student;
mod sweep;
mod teacher;
mod verify;

pub use config::{ExperimentConfig, InitScheme, ModelKind};
pub use exitprob::{exit_probability, ExitReport};
pub use reproduction::{
    estimate_cost, reproduce_full_scale, CostEstimate, ReproductionReport, LAMBDA_MIN_WINDOW, REFERENCE_LAMBDA_MIN_INIT,
};
pub use student::{alternating_signs, analyze_init, build_student, InitSummary, Student};
pub use sweep::{
    eta_check, heldout_error, prepare, run_alpha_sweep, simulate, trajectory_file_name, write_figure_tables,
    AlphaSummary, CellStatus, CellSummary, CurveStats, Problem, ReferenceCurve, SimulateSummary, SweepSummary,
};
pub use teacher::{dataset_csv, dataset_from_csv, generate_teacher_student, Teacher, TeacherConfig, TeacherStudent};
pub use verify::{verify, VerifyOutcome};
