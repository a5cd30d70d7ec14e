use core::fmt;

use alloc::string::String;

/// Errors raised by the core primitives.
#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A caller-supplied argument violated a precondition.
    InvalidArgument(String),
    /// Instance construction cannot succeed (e.g. fewer than two free cells).
    Infeasible(String),
    /// Tensor values were non-finite where finite values are required.
    NonFinite(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CoreError::Infeasible(msg) => write!(f, "infeasible instance: {msg}"),
            CoreError::NonFinite(msg) => write!(f, "non-finite data: {msg}"),
        }
    }
}

impl core::error::Error for CoreError {}
