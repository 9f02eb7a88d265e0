use dpd_core::DpdError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("solver diverged: {0}")]
    Divergence(String),
    #[error("bound violated by {regime} at k={k}: gap {gap:e} > bound {bound:e}")]
    BoundViolation {
        regime: String,
        k: usize,
        gap: f64,
        bound: f64,
    },
    #[error("rate check failed: {0}")]
    RateCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Divergence(_) => 4,
            Self::BoundViolation { .. } => 5,
            Self::RateCheck(_) => 6,
        }
    }
}

impl From<DpdError> for CliError {
    fn from(e: DpdError) -> Self {
        match e {
            DpdError::Io(_) | DpdError::InvalidInput(_) => Self::Io(e.to_string()),
            DpdError::Divergence { .. } | DpdError::Numerical(_) => Self::Divergence(e.to_string()),
            DpdError::Config(_) | DpdError::Unsupported(_) | DpdError::DimensionMismatch { .. } => {
                Self::Config(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
