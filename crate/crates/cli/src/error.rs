use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: malformed input: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Core(#[from] icas_sig::Error),

    #[error("{0}")]
    Failed(String),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// 0 success, 1 I/O, 2 configuration, 3 numerical or validation failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(icas_sig::Error::Io(_)) => 1,
            CliError::Config { .. } => 2,
            CliError::Core(icas_sig::Error::InvalidConfig { .. }) => 2,
            CliError::Format { .. } | CliError::Core(_) | CliError::Failed(_) => 3,
        }
    }
}
