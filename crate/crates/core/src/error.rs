use thiserror::Error;

/// Errors raised by the modem, channel, and link-layer operations.
#[derive(Debug, Clone, Error)]
pub enum ModelError {
    /// Input dimensions or layouts do not line up (packet length, sample
    /// counts, mismatched frames).
    #[error("framing error: {0}")]
    Framing(String),
    /// A parameter combination is invalid (cyclic prefix, geometry, delay
    /// spread exceeding the guard interval).
    #[error("configuration error: {0}")]
    Config(String),
}

pub(crate) fn framing(msg: impl Into<String>) -> ModelError {
    ModelError::Framing(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> ModelError {
    ModelError::Config(msg.into())
}
