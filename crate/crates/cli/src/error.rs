use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Argument(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    /// A file was readable but its contents are not a valid dataset or bundle.
    #[error("malformed file: {0}")]
    Format(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Argument(_) => 1,
            CliError::Io { .. } | CliError::Format(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }
}

impl From<hygt_core::Error> for CliError {
    fn from(e: hygt_core::Error) -> Self {
        use hygt_core::Error as E;
        match e {
            E::Argument(_) | E::Invariant(_) => CliError::Argument(e.to_string()),
            E::Numerical(_) | E::Overflow(_) => CliError::Numerical(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
