use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("kernel condition violated: {0}")]
    KernelCondition(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The iterative eigensolver ran out of budget. `residuals` holds the
    /// best relative residuals reached for the wanted pairs.
    #[error("solver did not converge: {message}")]
    Solver { message: String, residuals: Vec<f64> },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
