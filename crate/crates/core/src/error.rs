use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("value {value} outside admissible range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown frame index {0}")]
    UnknownFrame(usize),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid QP problem: {0}")]
    InvalidProblem(String),

    #[error("scenario parse error: {0}")]
    Parse(String),

    #[error("scenario error at {path}: {message}")]
    Scenario { path: String, message: String },

    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
}

/// Which precondition of the second-order safety lemma failed.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum HypothesisError {
    #[error("gains must be strictly positive (eta1 = {eta1}, eta2 = {eta2})")]
    NonPositiveGains { eta1: f64, eta2: f64 },

    #[error("gains give an oscillatory approach: eta1^2 - 4 eta2 = {discriminant} <= 0")]
    Oscillatory { discriminant: f64 },

    #[error("initial distance error must be positive, got {d0}")]
    NonPositiveInitialDistance { d0: f64 },

    #[error("eta1 = {eta1} is below the required 2|d'0|/d0 = {required}")]
    InsufficientDamping { eta1: f64, required: f64 },

    #[error("horizon and sample step must be positive and finite")]
    BadHorizon,
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
