use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("clip {clip_id}: {msg}")]
    Invalid { clip_id: String, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("clip {clip_id}: view {view} has no caption from captioner {captioner_id}")]
    MissingCaption {
        clip_id: String,
        view: usize,
        captioner_id: String,
    },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("i/o error on {path}: {err}")]
    Io {
        path: PathBuf,
        err: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(clip_id: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Invalid {
            clip_id: clip_id.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            err,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
