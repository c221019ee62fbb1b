use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate measure: {0}")]
    DegenerateMeasure(String),

    #[error("trajectory diverged at node {node}")]
    Divergence { node: usize },

    #[error("inadmissible perturbation: {0}")]
    Admissibility(String),

    #[error("descent step rejected: {0}")]
    StepRejected(String),

    #[error("backend mismatch: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
