use thiserror::Error;

/// Errors surfaced by configuration parsing, scenario validation and the
/// experiment runner. Anything else (contract violations such as deducting
/// energy from a dead node) is a programming error and panics via
/// `debug_assert!`.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SimError {
    pub fn config(msg: impl Into<String>) -> Self {
        SimError::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
