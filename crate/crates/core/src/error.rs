use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },

    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {deviation:e}")]
    NotSymmetric { i: usize, j: usize, deviation: f64 },

    #[error("matrix is not positive definite: pivot {pivot} is {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {found} too small, estimator requires at least {required}")]
    DimensionTooSmall { required: usize, found: usize },

    #[error("noisy strategy requires a noise covariance")]
    MissingNoiseMatrix,

    #[error("unexpected noise covariance for a noiseless strategy")]
    UnexpectedNoiseMatrix,

    #[error("division by zero risk")]
    DivisionByZero,

    #[error("advantage gap at point {index} is not positive ({gap:e})")]
    NonPositiveGap { index: usize, gap: f64 },

    #[error("rejection sampler gave up after {attempts} attempts")]
    MaxAttemptsExceeded { attempts: u64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
