//! Study sessions and per-judge presentation order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{JudgeError, Result};

/// One view pair to compare. `a` and `b` are the canonical sides; what the
/// judge sees as left/right is decided per judge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub clip_id: String,
    pub view_a: usize,
    pub view_b: usize,
    pub uri_a: String,
    pub uri_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub session_id: String,
    #[serde(default)]
    pub seed: u64,
    pub pairs: Vec<PairSpec>,
}

impl SessionSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| JudgeError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| JudgeError::Spec(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// The left view.
    First,
    /// The right view.
    Second,
    /// Equally informative.
    Both,
}

impl std::str::FromStr for Verdict {
    type Err = JudgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first" => Ok(Self::First),
            "second" => Ok(Self::Second),
            "both" => Ok(Self::Both),
            _ => Err(JudgeError::InvalidVerdict(s.to_string())),
        }
    }
}

/// A verdict mapped back to the canonical sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    A,
    B,
    Tie,
}

impl Outcome {
    pub fn from_verdict(verdict: Verdict, swapped: bool) -> Self {
        match (verdict, swapped) {
            (Verdict::Both, _) => Self::Tie,
            (Verdict::First, false) | (Verdict::Second, true) => Self::A,
            (Verdict::First, true) | (Verdict::Second, false) => Self::B,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudySession {
    spec: SessionSpec,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl StudySession {
    pub fn new(spec: SessionSpec) -> Result<Self> {
        if !valid_id(&spec.session_id) {
            return Err(JudgeError::Spec(format!(
                "session_id {:?} must be 1-128 characters of [A-Za-z0-9_-]",
                spec.session_id
            )));
        }
        if spec.pairs.is_empty() {
            return Err(JudgeError::Spec("no pairs".into()));
        }
        for (i, p) in spec.pairs.iter().enumerate() {
            if p.view_a == p.view_b {
                return Err(JudgeError::Spec(format!("pair {i}: view_a equals view_b ({})", p.view_a)));
            }
            if p.uri_a.is_empty() || p.uri_b.is_empty() {
                return Err(JudgeError::Spec(format!("pair {i}: empty media uri")));
            }
        }
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.spec
    }

    pub fn id(&self) -> &str {
        &self.spec.session_id
    }

    pub fn n_pairs(&self) -> usize {
        self.spec.pairs.len()
    }

    pub fn pair(&self, index: usize) -> Option<&PairSpec> {
        self.spec.pairs.get(index)
    }

    fn key(&self, tag: &[u8], judge_id: &str, pair_index: usize) -> u64 {
        let digest = Sha256::new()
            .chain_update(tag)
            .chain_update(self.spec.seed.to_le_bytes())
            .chain_update((judge_id.len() as u64).to_le_bytes())
            .chain_update(judge_id.as_bytes())
            .chain_update((pair_index as u64).to_le_bytes())
            .finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
    }

    /// Pair indices in the order this judge sees them.
    pub fn presentation_order(&self, judge_id: &str) -> Vec<usize> {
        let mut order: Vec<(u64, usize)> = (0..self.n_pairs())
            .map(|i| (self.key(b"order", judge_id, i), i))
            .collect();
        order.sort_unstable();
        order.into_iter().map(|(_, i)| i).collect()
    }

    /// Whether this judge sees view b on the left.
    pub fn swapped(&self, judge_id: &str, pair_index: usize) -> bool {
        self.key(b"swap", judge_id, pair_index) & 1 == 1
    }

    /// `(left_uri, right_uri)` for this judge.
    pub fn sides(&self, judge_id: &str, pair_index: usize) -> Option<(&str, &str)> {
        let p = self.pair(pair_index)?;
        Some(if self.swapped(judge_id, pair_index) {
            (&p.uri_b, &p.uri_a)
        } else {
            (&p.uri_a, &p.uri_b)
        })
    }
}

pub(crate) fn valid_judge_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && !id.chars().any(char::is_control)
}
