use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}:{line}: {message}")]
    MatrixMarket {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("block {block}: expected {expected}, got {found}")]
    Dimension {
        block: String,
        expected: String,
        found: String,
    },

    #[error("block {block}: unknown structure tag '{tag}'")]
    UnknownStructure { block: String, tag: String },

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("{0}")]
    Argument(String),

    #[error("block {block}: {source}")]
    Block {
        block: String,
        #[source]
        source: gspcond::Error,
    },

    #[error(transparent)]
    Core(#[from] gspcond::Error),

    #[error("failed to write output: {0}")]
    Output(String),
}

impl CliError {
    /// Stable machine-readable code; core errors keep their own code.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::MatrixMarket { .. } => "matrix-market",
            CliError::Dimension { .. } => "dimension-mismatch",
            CliError::UnknownStructure { .. } => "unknown-structure",
            CliError::Manifest(_) => "invalid-manifest",
            CliError::Argument(_) => "invalid-argument",
            CliError::Block { source, .. } | CliError::Core(source) => source.code(),
            CliError::Output(_) => "output",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
