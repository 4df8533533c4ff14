use thiserror::Error;

/// Errors raised anywhere in the solver pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SbmError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("point ({x}, {y}) lies outside the domain (signed distance {distance:e})")]
    OutsideDomain { x: f64, y: f64, distance: f64 },
    #[error("closest-point projection did not converge after {iterations} iterations")]
    ProjectionFailed { iterations: usize },
    #[error("domain too small for this grid: no background triangle lies inside it")]
    EmptySurrogate,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("derivative table holds orders up to {available}, order {requested} was needed")]
    MissingDerivative { requested: usize, available: usize },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SbmError {
    fn from(e: std::io::Error) -> Self {
        SbmError::Io(e.to_string())
    }
}

pub type Result<T, E = SbmError> = std::result::Result<T, E>;
