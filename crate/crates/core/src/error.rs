use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QfelError {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A size limit (basis cap, photon cutoff) is too small for the request.
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    /// Time integration exceeded an audit threshold by more than 10x or did not converge.
    #[error("integration error: {0}")]
    Integration(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = QfelError> = std::result::Result<T, E>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(QfelError::Domain(msg.into()))
}

pub(crate) fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(QfelError::DimensionMismatch { left, right })
    }
}
