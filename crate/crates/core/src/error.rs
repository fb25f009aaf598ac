use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("metric is not positive definite ({0})")]
    NotPositiveDefinite(String),
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("pivot pattern invalid at this point: {0}")]
    InvalidPivot(String),
    #[error("singular linear system (condition number {condition:.3e})")]
    Singular { condition: f64 },
    #[error("compatibility condition fails (omega_K condition number {condition:.3e})")]
    Compatibility { condition: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("invariance audit failed: {0}")]
    Audit(String),
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input description.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::RankDeficient(_)
                | Error::InvalidPivot(_)
                | Error::Singular { .. }
                | Error::Compatibility { .. }
                | Error::Hypothesis(_)
                | Error::Audit(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
