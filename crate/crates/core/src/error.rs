use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum MindError {
    #[error("grid mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    GridMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("operation requires a smooth regularizer, got {0}")]
    UnsupportedForNonsmooth(&'static str),
    #[error("unsupported regularizer for semismooth Newton: {0}")]
    UnsupportedRegularizer(&'static str),
    #[error("semismooth Newton diverged at delta = {delta:e}: {message}")]
    NewtonDiverged { delta: f64, message: String },
    #[error("image codec: {0}")]
    Codec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MindError>;
