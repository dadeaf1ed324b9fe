use std::path::PathBuf;

use humor_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("config: {0}")]
    Config(String),
    /// Transport failure that survived every retry; safe to retry later.
    #[error("request to {url} failed after {attempts} attempt(s): {message}")]
    Network {
        url: String,
        attempts: u32,
        message: String,
    },
    #[error("malformed payload from {url}: field `{field}`: {message}")]
    Decode {
        url: String,
        field: String,
        message: String,
    },
    #[error("vocabulary/config mismatch: checkpoint expects {expected}, found {found}")]
    Mismatch { expected: String, found: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: u64, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.to_string(),
        }
    }

    /// Short category name used in CLI error output.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Core(CoreError::InvalidConfig(_)) | Error::Config(_) => "config",
            Error::Core(_) | Error::Mismatch { .. } => "data",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "input",
            Error::Network { .. } => "network",
            Error::Decode { .. } => "upstream",
        }
    }

    /// Process exit code for the category.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "config" => 3,
            "io" => 4,
            "input" => 5,
            "network" | "upstream" => 6,
            _ => 7,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
