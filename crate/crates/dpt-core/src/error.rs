use thiserror::Error;

/// Errors surfaced by the tensor engine, light-field I/O and training harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor extents do not admit the requested operation.
    #[error("dimension error: {0}")]
    Dimension(String),
    /// A configuration value is outside its legal range.
    #[error("configuration error: {0}")]
    Config(String),
    /// An API was called in a way its contract forbids.
    #[error("usage error: {0}")]
    Usage(String),
    /// A file did not match the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),
    /// A NaN or infinity appeared where finite values are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Dimension(msg.into()))
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
