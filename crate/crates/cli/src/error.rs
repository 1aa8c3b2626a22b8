use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration, or unusable paths.
    #[error("configuration error: {0}")]
    Config(String),
    /// A computation failed or produced no usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Results were computed but miss their acceptance tolerance.
    #[error("tolerance failure: {0}")]
    Tolerance(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Tolerance(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Adds context in front of the message, keeping the class.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
            CliError::Tolerance(m) => CliError::Tolerance(format!("{ctx}: {m}")),
        }
    }
}

impl From<dicke_control::Error> for CliError {
    fn from(e: dicke_control::Error) -> Self {
        use dicke_control::Error as E;
        match e {
            E::Numerical(_) | E::DriveTooStrong { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
