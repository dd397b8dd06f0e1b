use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] sentisarc_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code class: 2 schema/input, 3 config/contract,
    /// 4 numerical failure, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        use sentisarc_core::Error as Core;
        match self {
            Error::Schema(_) | Error::Parse { .. } | Error::Csv(_) => 2,
            Error::VocabMismatch(_) | Error::Checkpoint(_) => 3,
            Error::Core(Core::Input(_)) => 2,
            Error::Core(Core::Config(_) | Core::Contract(_) | Core::DimMismatch { .. }) => 3,
            Error::Core(Core::NonFinite { .. }) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
