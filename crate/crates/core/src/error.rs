use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular drift evaluated at gap {gap} with no regularization")]
    Singularity { gap: f64 },

    #[error("divergence at step {step} (|state| = {magnitude:e}); retry with dt <= {suggested_dt:e}")]
    Divergence {
        step: usize,
        magnitude: f64,
        suggested_dt: f64,
    },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
