use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be >= 3, got {0}")]
    Dimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("non-positive conformal factor u = {value} at {point:?}")]
    NonPositiveFactor { value: f64, point: Vec<f64> },
    #[error("degenerate level set at {point:?}: |grad phi| = {norm:e}")]
    DegenerateLevelSet { point: Vec<f64>, norm: f64 },
    #[error("negative weight {value} at {point:?}")]
    NegativeWeight { value: f64, point: Vec<f64> },
    #[error("value {value} outside [0, 1] at cell {cell}")]
    OutOfRange { value: f64, cell: usize },
    #[error("solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("malformed grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
