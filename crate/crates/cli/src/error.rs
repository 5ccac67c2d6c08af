use std::path::PathBuf;

use thiserror::Error;

/// Everything that can stop a run, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error in {context}: {source}")]
    Numeric {
        context: String,
        #[source]
        source: dstring_core::Error,
    },
    #[error("i/o error on {}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }
}

/// Attaches a context label to core errors.
pub(crate) trait Numeric<T> {
    fn numeric(self, context: &str) -> Result<T, CliError>;
}

impl<T> Numeric<T> for dstring_core::Result<T> {
    fn numeric(self, context: &str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Numeric {
            context: context.to_string(),
            source,
        })
    }
}

/// Validation failures while building a config are config errors.
pub(crate) trait Invalid<T> {
    fn invalid(self, key: &str) -> Result<T, CliError>;
}

impl<T> Invalid<T> for dstring_core::Result<T> {
    fn invalid(self, key: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::Config(format!("{key}: {e}")))
    }
}
