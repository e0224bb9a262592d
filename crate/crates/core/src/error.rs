use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain the operation accepts.
    #[error("domain error: {0}")]
    Domain(String),

    /// Fixed-point values would wrap around one of the moduli.
    #[error("capacity error: {detail} (minimal q bit-length: {required_q_bits})")]
    Capacity { required_q_bits: u64, detail: String },

    #[error("key generation failed: {0}")]
    KeyGeneration(String),

    #[error("decryption error: {0}")]
    Decryption(String),

    /// Malformed bytes: wrong magic, version, width or length.
    #[error("format error: {0}")]
    Format(String),

    /// Missing or duplicated rows, results or history entries.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("config error: {0}")]
    Config(String),

    /// The Krylov iteration produced a (numerically) zero vector.
    #[error("breakdown after {dimension} basis vectors")]
    Breakdown { dimension: usize },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn integrity(msg: impl Into<String>) -> Self {
        Error::Integrity(msg.into())
    }

    pub(crate) fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }
}
