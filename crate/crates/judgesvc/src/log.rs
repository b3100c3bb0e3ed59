//! Append-only JSON-lines judgment log.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{JudgeError, Result};
use crate::session::{Outcome, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRecord {
    pub session_id: String,
    pub judge_id: String,
    pub pair_index: usize,
    /// As submitted, relative to the judge's left/right.
    pub verdict: Verdict,
    pub swapped: bool,
    pub outcome: Outcome,
    pub timestamp_ms: u64,
}

/// Read every record of a log file. A missing file is an empty log.
pub fn read_log(path: impl AsRef<Path>) -> Result<Vec<JudgmentRecord>> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(JudgeError::io(path, e)),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| JudgeError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| JudgeError::Log {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub struct JudgmentLog {
    path: PathBuf,
    file: File,
    records: Vec<JudgmentRecord>,
    seen: HashSet<(String, usize)>,
}

impl JudgmentLog {
    /// Open for appending, replaying what is already on disk.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let records = read_log(&path)?;
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert((r.judge_id.clone(), r.pair_index)) {
                return Err(JudgeError::Log {
                    path,
                    line: i + 1,
                    msg: format!("duplicate judgment for judge {:?}, pair {}", r.judge_id, r.pair_index),
                });
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| JudgeError::io(&path, e))?;
        Ok(Self {
            path,
            file,
            records,
            seen,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[JudgmentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn contains(&self, judge_id: &str, pair_index: usize) -> bool {
        self.seen.contains(&(judge_id.to_string(), pair_index))
    }

    /// Append and flush to disk. Rejects a second judgment for the same
    /// (judge, pair) without touching the file.
    pub fn append(&mut self, record: JudgmentRecord) -> Result<()> {
        if self.contains(&record.judge_id, record.pair_index) {
            return Err(JudgeError::Duplicate {
                judge_id: record.judge_id,
                pair_index: record.pair_index,
            });
        }
        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.sync_data())
            .map_err(|e| JudgeError::io(&self.path, e))?;
        self.seen.insert((record.judge_id.clone(), record.pair_index));
        self.records.push(record);
        Ok(())
    }
}
