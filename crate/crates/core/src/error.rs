use thiserror::Error;

/// Errors raised by operators, oracles and solvers.
#[derive(Debug, Error)]
pub enum DpdError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("iteration {iteration}: non-finite value in {iterate}")]
    Divergence { iteration: usize, iterate: &'static str },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DpdError>;

pub(crate) fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(DpdError::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
