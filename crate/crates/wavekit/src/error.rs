//! Error types shared across the toolkit.
//!
//! Two failure classes matter operationally: invalid inputs/configuration
//! (caught before any computation) and numerical failures detected during a
//! computation (NaN blow-up, singular systems, ill-conditioning past the
//! documented thresholds). The CLI maps them to exit codes 1 and 2.

use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum WavekitError {
    /// Invalid parameters, profiles, grids, or configuration files.
    #[error("validation error: {0}")]
    Validation(String),

    /// A computation produced non-finite values or an unsolvable system.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, WavekitError>;

impl WavekitError {
    /// Shorthand for a validation error with a formatted message.
    pub fn validation(msg: impl Into<String>) -> Self {
        WavekitError::Validation(msg.into())
    }

    /// Shorthand for a numerical error with a formatted message.
    pub fn numerical(msg: impl Into<String>) -> Self {
        WavekitError::Numerical(msg.into())
    }
}
