use thiserror::Error;

/// Errors produced by the simulator and the learning layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bin index {index} out of range 1..={count}")]
    BinOutOfRange { index: usize, count: usize },

    #[error("path-loss model not valid at d2D = {d2d_m:.3} m (valid range 10 m ..= 10 km)")]
    Domain { d2d_m: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("episode already finished")]
    EpisodeFinished,

    #[error("empty batch")]
    EmptyBatch,

    #[error("training diverged: non-finite loss at episode {episode}, step {step}")]
    Diverged { episode: usize, step: usize },

    #[error("grid of {required} evaluations exceeds the budget of {budget}; raise the budget or coarsen the step")]
    BudgetExceeded { required: u64, budget: u64 },

    #[error("malformed {kind} file at line {line}: {message}")]
    Format {
        kind: &'static str,
        line: usize,
        message: String,
    },

    #[error("unsupported {kind} file version {found} (expected {expected})")]
    Version {
        kind: &'static str,
        found: String,
        expected: u32,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
