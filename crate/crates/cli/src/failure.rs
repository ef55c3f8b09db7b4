use std::fmt;

use dpp_core::error::Error;

/// Exit status of a failed run.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, configuration or input data (exit 2).
    Input(String),
    /// Failure while executing a valid request (exit 3).
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Failure::Runtime(msg.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::SearchBudgetExceeded(_)
            | Error::DegenerateDistance
            | Error::EmptyBatch
            | Error::RowOutOfRange { .. }
            | Error::OutOfRange(_)
            | Error::NonPositiveScale(_)
            | Error::Io(_) => Failure::Runtime(msg),
            Error::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => Failure::Runtime(msg),
            _ => Failure::Input(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
