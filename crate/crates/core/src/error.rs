use std::io;

use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is invalid or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Inputs have incompatible shapes or sizes.
    #[error("structural error: {0}")]
    Structural(String),
    /// A statistical procedure lacks the data it needs.
    #[error("statistical error: {0}")]
    Statistical(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<S: Into<String>>(msg: S) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain<S: Into<String>>(msg: S) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn structural<S: Into<String>>(msg: S) -> Error {
    Error::Structural(msg.into())
}
