use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum JudgeError {
    #[error("session spec: {0}")]
    Spec(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("session {session_id:?} has no pair {pair_index}")]
    UnknownPair { session_id: String, pair_index: usize },
    #[error("judge {judge_id:?} already judged pair {pair_index}")]
    Duplicate { judge_id: String, pair_index: usize },
    #[error("pair {pair_index} is not the pair currently served to judge {judge_id:?}")]
    NotServed { judge_id: String, pair_index: usize },
    #[error("invalid verdict {0:?}; expected first, second or both")]
    InvalidVerdict(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("no judgments recorded")]
    NoJudgments,
    #[error("{path}: line {line}: {msg}")]
    Log { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {err}")]
    Io {
        path: PathBuf,
        err: std::io::Error,
    },
}

impl JudgeError {
    pub(crate) fn io(path: impl Into<PathBuf>, err: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            err,
        }
    }
}

pub type Result<T, E = JudgeError> = std::result::Result<T, E>;
