//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// Two tensors (or a tensor and a vector) do not have compatible shapes.
    #[error("shape mismatch: {context} (left {left:?}, right {right:?})")]
    ShapeMismatch {
        context: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// A mode index is outside `0..order`.
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    /// Generic invalid-argument error (non-finite input, bad config, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A dataset/model manifest could not be parsed or is inconsistent.
    #[error("corrupt manifest: {0}")]
    Manifest(String),

    /// A binary payload file is shorter than the manifest promises.
    #[error("truncated payload in {file}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        file: String,
        expected: usize,
        found: usize,
    },

    /// A payload length disagrees with the manifest shape product.
    #[error("payload shape mismatch in {file}: manifest implies {expected} values, found {found}")]
    PayloadShapeMismatch {
        file: String,
        expected: usize,
        found: usize,
    },

    /// A solver failed while fitting deflation term `term_index`.
    #[error("solver failure at term {term_index}: {source}")]
    TermFailure {
        term_index: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
