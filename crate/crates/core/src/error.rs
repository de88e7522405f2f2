use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("line {line}: duplicate frame name '{name}'")]
    DuplicateFrame { line: usize, name: String },

    #[error("line {line}: frame '{frame}' mentions unknown frame element '{fe}'")]
    UnknownMention {
        line: usize,
        frame: String,
        fe: String,
    },

    #[error("line {line}: frame '{frame}': {message}")]
    FeOrderMismatch {
        line: usize,
        frame: String,
        message: String,
    },

    #[error("line {line}: unknown frame '{frame}'")]
    UnknownFrame { line: usize, frame: String },

    #[error("line {line}: frame '{frame}' has no frame element '{fe}'")]
    UnknownFe {
        line: usize,
        frame: String,
        fe: String,
    },

    #[error("line {line}: invalid span: {message}")]
    InvalidSpan { line: usize, message: String },

    #[error("frame '{frame}' has no frame element '{fe}'")]
    NoSuchFe { frame: String, fe: String },

    #[error("frame '{0}' is not in the store")]
    NoSuchFrame(String),

    #[error("instance frame '{instance}' does not match template frame '{template}'")]
    FrameMismatch { instance: String, template: String },

    #[error("invalid encoder configuration: {0}")]
    InvalidConfig(String),

    #[error("input of length {len} exceeds maximum length {max_len}")]
    TooLong { len: usize, max_len: usize },

    #[error("token id {id} at position {pos} is outside the vocabulary of size {vocab_size}")]
    IdOutOfRange {
        id: usize,
        pos: usize,
        vocab_size: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("label {label} for slot {slot} is outside positions 0..={n}")]
    LabelOutOfRange { slot: usize, label: usize, n: usize },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("misaligned predictions at instance {index}: {message}")]
    Misaligned { index: usize, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("{0}")]
    Experiment(String),

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
