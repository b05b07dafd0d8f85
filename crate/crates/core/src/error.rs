use thiserror::Error;

/// Errors raised by the simulators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("arm index {arm} out of range for {num_arms} arms")]
    ArmOutOfRange { arm: usize, num_arms: usize },

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("sample size {n} too small, need at least {min}")]
    SampleSize { n: usize, min: usize },

    #[error("insufficient data for slope fit: {found} qualifying checkpoints, need {needed}")]
    InsufficientData { found: usize, needed: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_configuration(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
