use alloc::string::String;
use thiserror::Error;

use crate::support::Support;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DimensionError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Mismatch { expected: usize, found: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Dimension(#[from] DimensionError),

    /// A Poisson linear predictor left the representable range.
    #[error("linear predictor {value} exceeds the overflow clamp {clamp}")]
    Overflow { value: f64, clamp: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical factorization failed for model {0}")]
    Factorization(Support),

    #[error("p = {p} exceeds the exhaustive limit of {max}")]
    TooLarge { p: usize, max: usize },

    /// Coupled chains separated after meeting.
    #[error("coupled chains separated at step {step}")]
    CouplingBroken { step: u64 },

    #[error("operation requires the {expected} family")]
    WrongFamily { expected: &'static str },
}

pub type Result<T> = core::result::Result<T, Error>;
