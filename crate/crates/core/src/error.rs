use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid must be at least 4x4, got {rows}x{cols}")]
    GridTooSmall { rows: usize, cols: usize },

    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("non-finite sample at flat index {index}")]
    NonFinite { index: usize },

    #[error("field dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("solver diverged: non-finite `{field}` at iteration {iter}")]
    Diverged { iter: usize, field: &'static str },

    #[error("unknown phantom kind `{0}`")]
    UnknownPhantom(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
