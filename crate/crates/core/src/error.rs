use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, WlraError>;

#[derive(Debug, Error)]
pub enum WlraError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix data has {got} entries, expected {expected}")]
    DataLength { expected: usize, got: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("index {index} out of range for dimension {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation undefined for the zero matrix: {0}")]
    ZeroMatrix(&'static str),

    #[error("{0} is not positive semidefinite")]
    NotPositiveSemidefinite(&'static str),

    #[error("kernels of the system matrix and the preconditioner differ")]
    KernelMismatch,

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("unknown verification suite `{0}`")]
    UnknownSuite(String),

    #[error("malformed matrix file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl WlraError {
    pub(crate) fn shape(
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    ) -> Self {
        WlraError::ShapeMismatch { op, left, right }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        WlraError::InvalidParameter(msg.into())
    }
}
