use std::path::PathBuf;

use thiserror::Error;

/// Which half of a train/test pair a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Train,
    Test,
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Group::Train => f.write_str("train"),
            Group::Test => f.write_str("test"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite score in the {group} group")]
    InvalidScore { group: Group },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("value outside its domain: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("stratification failed: {0}")]
    Stratification(String),

    #[error("all {attempted} submodels failed (first failure: {first_reason})")]
    AllSubmodelsFailed {
        attempted: usize,
        first_reason: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {row}: cannot parse column `{column}` value {value:?}")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersion { expected: u32, found: u32 },

    #[error("io error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
