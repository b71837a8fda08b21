use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{key}`: {reason}")]
    ConfigInvalid { key: String, reason: String },

    #[error("invalid argument {flag}: {reason}")]
    BadArgument { flag: &'static str, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Pipeline(#[from] covdet_core::Error),
}

impl CliError {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        CliError::ConfigInvalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid { .. } | CliError::BadArgument { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::Pipeline(_) => 4,
        }
    }
}
