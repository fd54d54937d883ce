use thiserror::Error;

/// Errors raised by the resampling, filtering and experiment routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("weight vector is empty")]
    EmptyWeights,
    #[error("weight {index} is invalid ({value}); weights must be finite and non-negative")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to zero")]
    ZeroTotal,
    #[error("weight {index} is zero; the weight ratio is undefined")]
    ZeroWeight { index: usize },
    #[error("eta must be >= {min} (got {eta})")]
    InvalidEta { eta: f64, min: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("all particle weights collapsed to zero at t = {t}")]
    Degenerate { t: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures caused by the data rather than by the caller's arguments.
    pub fn is_degeneracy(&self) -> bool {
        matches!(self, Error::Degenerate { .. } | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
