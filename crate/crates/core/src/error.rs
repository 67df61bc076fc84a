use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: frame {frame}: {message}")]
    Parse {
        path: PathBuf,
        frame: usize,
        message: String,
    },

    #[error("{0}")]
    Format(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("degenerate pose at frame {frame}: {message}")]
    DegeneratePose { frame: usize, message: String },

    #[error("need at least {needed} frames, got {got}")]
    InsufficientFrames { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("no knowledge entry for action type {0}")]
    KnowledgeNotFound(u8),

    #[error("language model credential rejected or missing: {0}")]
    LlmCredential(String),

    #[error("language model request timed out after {0:?}")]
    LlmTimeout(std::time::Duration),

    #[error("language model transport error: {0}")]
    LlmTransport(String),

    #[error("language model endpoint returned HTTP {status}: {body}")]
    LlmStatus { status: u16, body: String },

    #[error("malformed language model response: {0}")]
    LlmResponse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
