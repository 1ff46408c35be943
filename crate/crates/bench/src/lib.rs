//! Fixtures shared by the benchmarks.

use lazy_sgld::experiments::{analyze_init, build_student, prepare, ExperimentConfig, InitSummary, Student};
use lazy_sgld::Dataset;

/// A student with its training data and initial measurements.
pub struct Fixture {
    pub config: ExperimentConfig,
    pub data: Dataset,
    pub student: Student,
    pub init: InitSummary,
}

/// Desk-sized problem, optionally resized to width `m` and `n` samples.
pub fn fixture(m: usize, n: usize) -> Fixture {
    let mut config = ExperimentConfig::desk();
    config.width = m;
    config.n_samples = n;
    let data = prepare(&config).expect("valid preset").data.train;
    let student = build_student(&config, 0).expect("valid student");
    let init = analyze_init(&student, &data).expect("init analysis");
    Fixture { config, data, student, init }
}
