//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RdmError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigendecomposition did not converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("basis dimension {dim} exceeds the dense-solver limit {limit}")]
    BasisTooLarge { dim: usize, limit: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RdmError>;
