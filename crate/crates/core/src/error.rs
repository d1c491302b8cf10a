use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The signal carries no power outside DC, so no cutoff frequency exists.
    #[error("no signal: {0}")]
    NoSignal(String),

    /// An iterative solver stopped at its iteration cap. The last iterate is
    /// kept so callers can decide whether it is usable.
    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("regression failed: {0}")]
    Fit(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
