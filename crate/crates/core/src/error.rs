use thiserror::Error;

#[derive(Debug, Error)]
pub enum HartreeError {
    #[error("unsupported dimension {0}: supported dimensions are 3, 4, 5")]
    UnsupportedDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("solver did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NotConverged { iterations: usize, best_residual: f64 },
    #[error("loss of positivity: {0}")]
    PositivityLost(String),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, HartreeError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HartreeError::InvalidParameter(msg.into()))
}
