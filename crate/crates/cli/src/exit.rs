use std::fmt;

use slln_core::Error;

pub const OK: u8 = 0;
pub const EXPECTATION_FAILED: u8 = 1;
pub const USAGE: u8 = 2;
pub const NUMERICAL: u8 = 3;

/// An error with the process exit status it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Self {
            code: NUMERICAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Argument(_)
            | Error::Dimension { .. }
            | Error::NotDoubling(_)
            | Error::Inadmissible(_)
            | Error::Precondition(_)
            | Error::Range { .. }
            | Error::Format(_) => USAGE,
            Error::Truncation { .. }
            | Error::Quadrature { .. }
            | Error::Construction(_)
            | Error::Memory { .. }
            | Error::Io(_) => NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::resource(format!("io: {e}"))
    }
}
