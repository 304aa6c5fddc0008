use alloc::string::String;

/// Errors produced by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An input vector does not have the length the receiver expects.
    #[error("input shape mismatch: expected {expected}, got {got}")]
    InputShape { expected: usize, got: usize },

    /// Two shaped objects (layouts, parameter vectors, report parts) disagree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An operation was called in the wrong state (missing tape, unevaluated member, ...).
    #[error("invalid state: {0}")]
    State(String),

    /// A class label is outside the declared class range.
    #[error("label {label} out of range for {num_classes} classes")]
    Label { label: usize, num_classes: usize },

    /// A configuration value violates its invariant.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A numeric value is not usable (NaN where a number is required).
    #[error("invalid value: {0}")]
    Value(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn state(msg: impl Into<String>) -> Error {
    Error::State(msg.into())
}
