use thiserror::Error;

#[derive(Debug, Error)]
pub enum SifsError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty input: no samples found")]
    EmptyInput,

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("solver did not converge after {epochs} epochs (last gap {gap:e})")]
    NonConvergence { epochs: usize, gap: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SifsError>;
