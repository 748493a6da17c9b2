use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the documented domain of the operation.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// The operation is not available for this graph family or size.
    #[error("unsupported: {0}")]
    Capability(String),
    /// A numerical routine failed to converge or to bracket a root.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
