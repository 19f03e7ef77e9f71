use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain too small: {0}")]
    DomainTooSmall(String),
    #[error("degenerate state: {0}")]
    DegenerateState(String),
    #[error("unsupported normalization: {0}")]
    UnsupportedNormalization(String),
    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),
    #[error("non-Hermitian input: max deviation {0:e}")]
    NonHermitian(f64),
    #[error("not normalized: trace {0}")]
    NotNormalized(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
