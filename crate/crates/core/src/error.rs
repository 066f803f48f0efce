use thiserror::Error;

/// Errors produced across the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Levy measure ({assumption}): {detail}")]
    InvalidMeasure {
        assumption: &'static str,
        detail: String,
    },

    #[error("cannot sample: {0}")]
    CannotSample(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("non-finite value at event {index}: {value}")]
    NumericalOverflow { index: usize, value: f64 },

    #[error("expected {expected:.3e} events exceeds the cap of {cap}")]
    ResourceCap { expected: f64, cap: usize },

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid density ratio: {0}")]
    InvalidRatio(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("insufficient sample: {got} values, need at least {need}")]
    InsufficientSample { got: usize, need: usize },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical, 4 resource cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::InvalidMeasure { .. }
            | Error::Domain(_)
            | Error::InvalidRatio(_)
            | Error::InvariantViolation(_)
            | Error::CannotSample(_)
            | Error::Io { .. } => 2,
            Error::ResourceCap { .. } => 4,
            Error::NumericalFailure(_)
            | Error::NumericalOverflow { .. }
            | Error::InsufficientSample { .. }
            | Error::DegenerateFit(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
