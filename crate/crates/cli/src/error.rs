use std::fmt;
use std::process::ExitCode;

use seceig_core::Error;

/// Exit status classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Config = 2,
    Protocol = 3,
    Numerical = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub status: Status,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            status: Status::Config,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.status as u8)
    }

    /// Prefixes the message, keeping the status.
    pub fn context(self, what: impl fmt::Display) -> Self {
        CliError {
            status: self.status,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Domain(_)
            | Error::Capacity { .. }
            | Error::KeyGeneration(_)
            | Error::Config(_)
            | Error::Format(_) => Status::Config,
            Error::Decryption(_) | Error::Integrity(_) | Error::Protocol(_) | Error::Io(_) => Status::Protocol,
            Error::Breakdown { .. } | Error::Numerical(_) => Status::Numerical,
        };
        CliError {
            status,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::from(Error::Io(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub trait Context<T> {
    fn context(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| e.into().context(what))
    }
}
