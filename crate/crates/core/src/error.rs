use std::fmt;

/// Errors surfaced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("below threshold: {0}")]
    BelowThreshold(String),
    #[error("solver stopped after {0}")]
    NotConverged(Residuals),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Solver state attached to a non-convergence error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub iterations: usize,
    pub primal: f64,
    pub dual: f64,
}

impl fmt::Display for Residuals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} iterations (primal residual {:.3e}, dual residual {:.3e})",
            self.iterations, self.primal, self.dual
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
