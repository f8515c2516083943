//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GslrError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("filter support {fx}x{fy} exceeds grid {nx}x{ny}")]
    FilterTooLarge {
        fx: usize,
        fy: usize,
        nx: usize,
        ny: usize,
    },

    #[error("non-finite value at linear index {0}")]
    NonFinite(usize),

    #[error("matrix is not Hermitian within tolerance (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("inconsistent header: {0}")]
    InconsistentHeader(String),

    #[error("unsupported dtype: {0}")]
    UnsupportedDtype(String),

    #[error("truncated payload: expected {expected} bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },

    #[error("input not found: {0}")]
    InputNotFound(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GslrError>;
