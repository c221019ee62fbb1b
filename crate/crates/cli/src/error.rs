use std::fmt;

/// Failure classes, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Exit 1: malformed or invalid configuration, unusable paths.
    Config { key: String, message: String },
    /// Exit 2: an iteration stopped before reaching its tolerance.
    NonConvergence(String),
    /// Exit 3: a numerical invariant failed or a computation broke down.
    Invariant(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Configuration errors from the core are re-keyed under `section`.
    pub fn from_core(section: &str, e: mfoc::Error) -> Self {
        match e {
            mfoc::Error::Config { key, message } => {
                let key = if section.is_empty() || key.starts_with(&format!("{section}.")) {
                    key
                } else {
                    format!("{section}.{key}")
                };
                CliError::Config { key, message }
            }
            other => CliError::Invariant(other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { key, message } => write!(f, "configuration error at `{key}`: {message}"),
            CliError::NonConvergence(m) => write!(f, "not converged: {m}"),
            CliError::Invariant(m) => write!(f, "invariant failure: {m}"),
        }
    }
}

impl From<mfoc::Error> for CliError {
    fn from(e: mfoc::Error) -> Self {
        CliError::from_core("problem", e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config("--out", e.to_string())
    }
}
