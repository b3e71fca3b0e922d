use std::path::PathBuf;

/// Errors raised by the harness. Configuration problems map to exit code 2,
/// everything else to 3.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] relabel_core::Error),
}

impl HarnessError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        HarnessError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        HarnessError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
