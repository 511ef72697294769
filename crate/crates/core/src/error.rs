use thiserror::Error;

/// Errors raised by the library.
///
/// The CLI maps every variant except [`Error::Numerical`] to the usage-error
/// exit code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("time {t} is outside the tabulated range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("invalid time range: s = {s} is later than t = {t}")]
    InvalidRange { s: f64, t: f64 },

    #[error("dynamics is not invertible: {0}")]
    NonInvertible(String),

    #[error("argument outside the admissible domain: {0}")]
    Domain(String),

    #[error("boundary weights {0:?}: use the eternally non-Markovian classification instead")]
    BoundaryWeights([f64; 3]),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("model has no closed-form t -> infinity limit: {0}")]
    NoAsymptote(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
