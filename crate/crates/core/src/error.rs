use std::path::PathBuf;

use dagr_tensor::TensorError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed {what}: {detail}")]
    Format { what: String, detail: String },
    #[error("checkpoint hash mismatch: manifest {expected}, blobs {found}")]
    HashMismatch { expected: String, found: String },
    #[error("checkpoint format version {found}, expected {expected}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("run {config} failed: {source}")]
    Ablation { config: String, source: Box<Error> },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: impl Into<String>, detail: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.to_string(),
        }
    }

    /// Short machine-readable tag, used in the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Tensor(_) => "tensor",
            Error::Config(_) => "config",
            Error::Degenerate(_) => "degenerate",
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::HashMismatch { .. } => "hash_mismatch",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::MissingTensor(_) => "missing_tensor",
            Error::Ablation { .. } => "ablation",
            Error::Verification(_) => "verification",
        }
    }
}

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
