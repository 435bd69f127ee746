use thiserror::Error;

/// Errors surfaced by the library and the `eve` binary.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration value is missing, malformed or out of range.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// A caller broke an operation's precondition (shape mismatch, bad index, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric input that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// A factor handed to the Kronecker sampler is not symmetric positive definite.
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    /// Q-values or bootstrap targets left the representable range during learning.
    #[error("divergence after {learner_steps} learner steps: {detail}")]
    Divergence { learner_steps: u64, detail: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
