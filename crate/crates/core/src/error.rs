use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("newton iteration did not converge after {iterations} iterations (best residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("singular jacobian at iterate {iteration}")]
    Singular { iteration: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("expected a {expected} fixed point, found {found}")]
    Classification { expected: String, found: String },

    #[error("inconsistent spectrum: {0}")]
    Inconsistent(String),

    #[error("implicit step failed to converge at t = {time}")]
    StepFailure { time: f64 },

    #[error("integration truncated after {steps} steps at t = {time}")]
    Truncated { steps: usize, time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
