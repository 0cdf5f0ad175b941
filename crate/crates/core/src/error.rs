use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("could not bracket zero number {k} of J_{nu}")]
    BracketFailure { nu: f64, k: usize },

    #[error("zero number {k} of J_{nu} refined only to residual {residual:e}")]
    ZeroRefinement { nu: f64, k: usize, residual: f64 },

    #[error("exponents {index} and {next} are closer than {min_gap:e}")]
    DuplicateExponent { index: usize, next: usize, min_gap: f64 },

    #[error("ill-conditioned Gram system: residual {residual:e}, condition estimate {condition:e}")]
    IllConditioned { residual: f64, condition: f64 },

    #[error("the left control is undefined at the critical potential mu = {mu_crit}")]
    CriticalPotential { mu_crit: f64 },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("overflow: {0}")]
    Overflow(String),
}

impl Error {
    /// True for errors that stem from floating point limits rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BracketFailure { .. }
                | Error::ZeroRefinement { .. }
                | Error::IllConditioned { .. }
                | Error::Overflow(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
