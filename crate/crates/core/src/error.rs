use thiserror::Error;

use crate::algebra::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid generator: {0}")]
    InvalidGenerator(ValidationReport),

    #[error("order {order} exceeds the configured maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("order mismatch: expected {expected}, found {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("order {order} is below the minimum {min} required here")]
    OrderTooSmall { order: usize, min: usize },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time {0} is not a point of the propagator grid")]
    OffGrid(f64),

    #[error("invalid Gaussian data: {0}")]
    InvalidGaussian(String),

    #[error("invalid Poisson model: {0}")]
    InvalidPoisson(String),

    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("record format: {0}")]
    Record(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
