use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {reason}")]
    Config { field: &'static str, reason: String },

    #[error("field is in {found} representation, operation requires {expected}")]
    Representation {
        expected: &'static str,
        found: &'static str,
    },

    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    Shape {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },

    #[error("singular system in {context}")]
    Singular { context: &'static str },

    #[error("solution diverged at step {step} (recent max |u|: {history:?})")]
    Diverged { step: u64, history: Vec<f64> },

    #[error("statistics are empty: no samples accumulated")]
    EmptyStatistics,

    #[error("correlation undefined: component {component} has zero variance")]
    UndefinedCorrelation { component: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err(field: &'static str, reason: impl Into<String>) -> Error {
    Error::Config {
        field,
        reason: reason.into(),
    }
}
