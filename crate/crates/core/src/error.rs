use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dense capacity exceeded: {requested} > cap {cap}")]
    Capacity { requested: usize, cap: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("optimality gap is zero, ratio undefined")]
    ZeroGap,
    #[error("optimality gap degenerate ({gap:e}); martingale tracking stops")]
    GapDegenerate { gap: f64 },
    #[error("trajectory diverged at step {step}")]
    Divergence { step: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dataset does not match the one the model was linearized on")]
    DatasetMismatch,
    #[error("config error: {0}")]
    Config(String),
    #[error("compute budget not acknowledged: {0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
