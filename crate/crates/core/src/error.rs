use thiserror::Error;

/// Errors produced by the evaluation, fitting, and blending routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A value is outside the domain an operation is defined on
    /// (nonpositive actual, negative prediction, zero prediction total, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Prediction sets do not share ids and actuals.
    #[error("misaligned prediction sets: {0}")]
    Misaligned(String),

    /// Too few usable samples to run a computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The regression design matrix is rank deficient.
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    /// An option or parameter is out of its allowed range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
