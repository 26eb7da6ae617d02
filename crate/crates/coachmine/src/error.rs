use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A malformed record, with the 1-indexed line it came from when known.
    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Core(#[from] coachmine_core::Error),
    #[error("llm: {0}")]
    Llm(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn format(path: impl AsRef<Path>, line: Option<usize>, message: impl ToString) -> Self {
        Error::Format {
            path: path.as_ref().to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config_error",
            Error::Io { .. } => "io_error",
            Error::Format { .. } => "format_error",
            Error::Core(_) => "stage_error",
            Error::Llm(_) => "llm_error",
        }
    }

    /// The single-line JSON record the CLI prints on failure.
    pub fn record(&self) -> ErrorRecord {
        let (path, line) = match self {
            Error::Io { path, .. } => (Some(path.display().to_string()), None),
            Error::Format { path, line, .. } => (Some(path.display().to_string()), *line),
            _ => (None, None),
        };
        ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            path,
            line,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}
