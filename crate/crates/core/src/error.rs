use thiserror::Error;

/// Errors raised by the library. Numerical non-convergence is reported through
/// solution status fields, not through this type.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("instance is not diagonal: {0}")]
    NotDiagonal(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("decomposition error: {0}")]
    Decomposition(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
