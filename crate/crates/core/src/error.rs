use thiserror::Error;

/// Errors raised by model-space, loss, prior, and risk operations.
#[derive(Error, Debug)]
pub enum Error {
    /// Enumeration or solver size guard exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Invalid argument (mismatched dimensions, malformed input, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A calibration target that no hyperparameter value can reach.
    #[error("target {target} unreachable; attainable range is [{lo}, {hi}]")]
    Infeasible { target: f64, lo: f64, hi: f64 },

    /// A (loss, prior) pair with no closed-form route.
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
