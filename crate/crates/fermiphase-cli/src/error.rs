//! Error type carrying the process exit code.
//!
//! The contract: 0 success, 1 configuration or validation trouble, 2 a
//! numerical abort (divergence ceiling, factorization failure), 3 a
//! comparison that ran fine but found disagreement.

use std::fmt;

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_COMPARISON: i32 = 3;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    pub fn comparison(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_COMPARISON,
            message: message.into(),
        }
    }

    /// Prefix the message with where it happened.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<fermiphase::Error> for CliError {
    fn from(err: fermiphase::Error) -> Self {
        use fermiphase::Error;
        let code = match err {
            Error::Config(_) | Error::Validation(_) => EXIT_VALIDATION,
            Error::Structural(_) | Error::Numerical(_) | Error::DivergenceCeiling { .. } => {
                EXIT_NUMERICAL
            }
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::validation(err.to_string())
    }
}
