use std::path::PathBuf;

use dispatch_core::{DemandError, GraphError, RelocationError, SimError};

#[derive(Debug, thiserror::Error)]
pub enum DispatchError {
    #[error("input file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Graph {
        path: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("refusing to compare: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Relocation(#[from] RelocationError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl DispatchError {
    /// Process exit status for the CLI: 2 for bad input, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            DispatchError::MissingFile(_)
            | DispatchError::Config(_)
            | DispatchError::Parse { .. }
            | DispatchError::Graph { .. }
            | DispatchError::Mismatch(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            DispatchError::MissingFile(path)
        } else {
            DispatchError::Io { path, source }
        }
    }
}

pub type Result<T, E = DispatchError> = std::result::Result<T, E>;
