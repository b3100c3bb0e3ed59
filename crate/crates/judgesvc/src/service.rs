//! Session state shared by all HTTP handlers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{JudgeError, Result};
use crate::log::{JudgmentLog, JudgmentRecord};
use crate::session::{valid_judge_id, Outcome, SessionSpec, StudySession, Verdict};
use crate::tally::{tally, Side, Tally, TallyMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub done: usize,
    pub total: usize,
}

/// What a judge should look at next. Never carries narration text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NextPair {
    Pair {
        pair_index: usize,
        left_uri: String,
        right_uri: String,
        progress: Progress,
    },
    Done {
        done: bool,
        progress: Progress,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub session_id: String,
    pub judge_id: String,
    pub pair_index: usize,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub ok: bool,
    pub outcome: Outcome,
    pub log_len: usize,
}

/// A session plus its judgment log. Submissions serialize on the log lock.
pub struct Study {
    session: StudySession,
    log: Mutex<JudgmentLog>,
}

pub fn session_file(data_dir: &Path, session_id: &str) -> PathBuf {
    data_dir.join(format!("{session_id}.session.json"))
}

pub fn log_file(data_dir: &Path, session_id: &str) -> PathBuf {
    data_dir.join(format!("{session_id}.judgments.jsonl"))
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Study {
    /// Persist the session spec under `data_dir` (or check it matches the
    /// copy already there) and replay the existing judgment log.
    pub fn create(data_dir: &Path, spec: SessionSpec) -> Result<Self> {
        let session = StudySession::new(spec)?;
        std::fs::create_dir_all(data_dir).map_err(|e| JudgeError::io(data_dir, e))?;
        let spec_path = session_file(data_dir, session.id());
        match std::fs::read_to_string(&spec_path) {
            Ok(text) => {
                let stored: SessionSpec = serde_json::from_str(&text)
                    .map_err(|e| JudgeError::Spec(format!("{}: {e}", spec_path.display())))?;
                if &stored != session.spec() {
                    return Err(JudgeError::Spec(format!(
                        "{} exists with different pairs or seed; use a new session_id",
                        spec_path.display()
                    )));
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let text = serde_json::to_string_pretty(session.spec()).expect("spec serializes");
                std::fs::write(&spec_path, text + "\n").map_err(|e| JudgeError::io(&spec_path, e))?;
            }
            Err(e) => return Err(JudgeError::io(&spec_path, e)),
        }
        let log = JudgmentLog::open(log_file(data_dir, session.id()))?;
        for r in log.records() {
            if r.pair_index >= session.n_pairs() || r.session_id != session.id() {
                return Err(JudgeError::Log {
                    path: log.path().to_path_buf(),
                    line: 0,
                    msg: format!("record for pair {} does not belong to this session", r.pair_index),
                });
            }
        }
        Ok(Self {
            session,
            log: Mutex::new(log),
        })
    }

    pub fn session(&self) -> &StudySession {
        &self.session
    }

    fn lock(&self) -> MutexGuard<'_, JudgmentLog> {
        self.log.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn records(&self) -> Vec<JudgmentRecord> {
        self.lock().records().to_vec()
    }

    fn cursor(&self, log: &JudgmentLog, judge_id: &str) -> (Option<usize>, Progress) {
        let order = self.session.presentation_order(judge_id);
        let done = order.iter().filter(|&&i| log.contains(judge_id, i)).count();
        let next = order.into_iter().find(|&i| !log.contains(judge_id, i));
        (
            next,
            Progress {
                done,
                total: self.session.n_pairs(),
            },
        )
    }

    pub fn next_pair(&self, judge_id: &str) -> Result<NextPair> {
        if !valid_judge_id(judge_id) {
            return Err(JudgeError::BadRequest("judge id must be 1-128 printable characters".into()));
        }
        let log = self.lock();
        let (next, progress) = self.cursor(&log, judge_id);
        Ok(match next {
            None => NextPair::Done { done: true, progress },
            Some(i) => {
                let (l, r) = self.session.sides(judge_id, i).expect("index from order");
                NextPair::Pair {
                    pair_index: i,
                    left_uri: l.to_string(),
                    right_uri: r.to_string(),
                    progress,
                }
            }
        })
    }

    pub fn submit(&self, s: &Submission) -> Result<Ack> {
        let verdict: Verdict = s.verdict.parse()?;
        if !valid_judge_id(&s.judge_id) {
            return Err(JudgeError::BadRequest("judge id must be 1-128 printable characters".into()));
        }
        if s.pair_index >= self.session.n_pairs() {
            return Err(JudgeError::UnknownPair {
                session_id: self.session.id().to_string(),
                pair_index: s.pair_index,
            });
        }
        let mut log = self.lock();
        if log.contains(&s.judge_id, s.pair_index) {
            return Err(JudgeError::Duplicate {
                judge_id: s.judge_id.clone(),
                pair_index: s.pair_index,
            });
        }
        if self.cursor(&log, &s.judge_id).0 != Some(s.pair_index) {
            return Err(JudgeError::NotServed {
                judge_id: s.judge_id.clone(),
                pair_index: s.pair_index,
            });
        }
        let swapped = self.session.swapped(&s.judge_id, s.pair_index);
        let outcome = Outcome::from_verdict(verdict, swapped);
        log.append(JudgmentRecord {
            session_id: self.session.id().to_string(),
            judge_id: s.judge_id.clone(),
            pair_index: s.pair_index,
            verdict,
            swapped,
            outcome,
            timestamp_ms: now_ms(),
        })?;
        Ok(Ack {
            ok: true,
            outcome,
            log_len: log.len(),
        })
    }

    pub fn tally(&self, side: Side, mode: TallyMode) -> Result<Tally> {
        tally(self.lock().records(), side, mode)
    }
}

/// All sessions served by one process, plus the media root.
pub struct Service {
    studies: BTreeMap<String, Study>,
    media_dir: Option<PathBuf>,
}

impl Service {
    pub fn new(media_dir: Option<PathBuf>) -> Self {
        Self {
            studies: BTreeMap::new(),
            media_dir,
        }
    }

    pub fn add(&mut self, study: Study) -> Result<()> {
        let id = study.session().id().to_string();
        if self.studies.contains_key(&id) {
            return Err(JudgeError::Spec(format!("session {id:?} given twice")));
        }
        self.studies.insert(id, study);
        Ok(())
    }

    pub fn study(&self, session_id: &str) -> Result<&Study> {
        self.studies
            .get(session_id)
            .ok_or_else(|| JudgeError::UnknownSession(session_id.to_string()))
    }

    pub fn session_ids(&self) -> impl Iterator<Item = &str> {
        self.studies.keys().map(String::as_str)
    }

    pub fn media_dir(&self) -> Option<&Path> {
        self.media_dir.as_deref()
    }

    pub fn submit(&self, s: &Submission) -> Result<Ack> {
        self.study(&s.session_id)?.submit(s)
    }
}
