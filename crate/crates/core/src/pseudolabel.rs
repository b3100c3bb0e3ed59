//! Best-view pseudo-labels: score each view's predicted caption against the
//! ground-truth narration, rank views per captioner, and aggregate the
//! top-ranked views across captioners.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Clip, Corpus};
use crate::error::{Error, Result};
use crate::textmetrics::{CaptionScorer, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationPolicy {
    /// Every view that is top-ranked by at least one captioner.
    #[default]
    Union,
    /// Views top-ranked by every captioner, falling back to majority, then union.
    IntersectionFallback,
    /// Views top-ranked by at least `ceil(K/2)` captioners, falling back to union.
    Majority,
}

impl std::str::FromStr for AggregationPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "union" => Ok(Self::Union),
            "intersection_fallback" | "intersection" => Ok(Self::IntersectionFallback),
            "majority" => Ok(Self::Majority),
            other => Err(format!(
                "unknown policy {other:?} (expected union, intersection_fallback or majority)"
            )),
        }
    }
}

/// One captioner's per-view scores and dense ranks (1 = best).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScores {
    pub captioner_id: String,
    pub scores: Vec<f64>,
    pub ranks: Vec<usize>,
}

impl ViewScores {
    pub fn from_scores(captioner_id: impl Into<String>, scores: Vec<f64>) -> Self {
        let ranks = dense_ranks(&scores);
        Self {
            captioner_id: captioner_id.into(),
            scores,
            ranks,
        }
    }

    pub fn top_set(&self) -> BTreeSet<usize> {
        self.ranks
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == 1)
            .map(|(i, _)| i)
            .collect()
    }

    /// View indices sorted by descending score, ties by lowest index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }
}

/// Dense ranks: equal scores share a rank, ranks are contiguous from 1.
pub fn dense_ranks(scores: &[f64]) -> Vec<usize> {
    let mut distinct: Vec<f64> = scores.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    scores
        .iter()
        .map(|s| distinct.iter().position(|d| d == s).expect("score present") + 1)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelSet {
    pub clip_id: String,
    pub labels: BTreeSet<usize>,
    pub per_captioner: Vec<ViewScores>,
    pub policy: AggregationPolicy,
}

pub fn score_and_rank(clip: &Clip, captioner_id: &str, scorer: &CaptionScorer) -> Result<ViewScores> {
    let scores = (0..clip.n_views())
        .map(|v| Ok(scorer.score(clip.caption(v, captioner_id)?, &clip.narration)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ViewScores::from_scores(captioner_id, scores))
}

pub fn aggregate_consensus(per_captioner: &[ViewScores], policy: AggregationPolicy) -> Result<BTreeSet<usize>> {
    let first = per_captioner
        .first()
        .ok_or_else(|| Error::InvalidArgument("no captioner scores to aggregate".into()))?;
    let n = first.ranks.len();
    if let Some(bad) = per_captioner.iter().find(|s| s.ranks.len() != n) {
        return Err(Error::Dimension(format!(
            "captioner {} ranks {} views, expected {n}",
            bad.captioner_id,
            bad.ranks.len()
        )));
    }
    let tops: Vec<BTreeSet<usize>> = per_captioner.iter().map(ViewScores::top_set).collect();
    let union: BTreeSet<usize> = tops.iter().flatten().copied().collect();
    let k = tops.len();
    let majority = || -> BTreeSet<usize> {
        let need = k.div_ceil(2);
        union
            .iter()
            .copied()
            .filter(|v| tops.iter().filter(|t| t.contains(v)).count() >= need)
            .collect()
    };
    let result = match policy {
        AggregationPolicy::Union => union.clone(),
        AggregationPolicy::Majority => majority(),
        AggregationPolicy::IntersectionFallback => {
            let inter: BTreeSet<usize> = union
                .iter()
                .copied()
                .filter(|v| tops.iter().all(|t| t.contains(v)))
                .collect();
            if inter.is_empty() {
                majority()
            } else {
                inter
            }
        }
    };
    Ok(if result.is_empty() { union } else { result })
}

#[derive(Debug, Clone)]
pub struct LabelConfig {
    pub metric: Metric,
    pub stem: bool,
    pub policy: AggregationPolicy,
    /// Restrict scoring to these captioners (all corpus captioners when `None`).
    pub captioners: Option<Vec<String>>,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            metric: Metric::Cider,
            stem: true,
            policy: AggregationPolicy::Union,
            captioners: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelOutput {
    pub labels: BTreeMap<String, PseudoLabelSet>,
    /// Fraction of clips whose label set contains view `n`.
    pub view_frequency: Vec<f64>,
    /// Fraction of clips whose label set has exactly `k + 1` views.
    pub set_size_frequency: Vec<f64>,
}

/// Label every clip of a corpus. The document-frequency table is built from
/// the corpus' own narrations.
pub fn label_corpus(corpus: &Corpus, config: &LabelConfig) -> Result<LabelOutput> {
    let scorer = CaptionScorer::new(
        config.metric,
        config.stem,
        corpus.clips().iter().map(|c| c.narration.as_str()),
    )?;
    let captioners: Vec<String> = match &config.captioners {
        Some(ids) => {
            for id in ids {
                if !corpus.captioner_ids().contains(id) {
                    return Err(Error::InvalidArgument(format!("unknown captioner {id}")));
                }
            }
            ids.clone()
        }
        None => corpus.captioner_ids().to_vec(),
    };
    if captioners.is_empty() {
        return Err(Error::InvalidArgument("no captioners selected".into()));
    }

    let sets = corpus
        .clips()
        .par_iter()
        .map(|clip| {
            let per_captioner = captioners
                .iter()
                .map(|k| score_and_rank(clip, k, &scorer))
                .collect::<Result<Vec<_>>>()?;
            let labels = aggregate_consensus(&per_captioner, config.policy)?;
            Ok(PseudoLabelSet {
                clip_id: clip.clip_id.clone(),
                labels,
                per_captioner,
                policy: config.policy,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n_views = corpus.n_views().unwrap_or(0);
    let mut view_frequency = vec![0.0; n_views];
    let mut set_size_frequency = vec![0.0; n_views];
    for s in &sets {
        for &v in &s.labels {
            view_frequency[v] += 1.0;
        }
        set_size_frequency[s.labels.len() - 1] += 1.0;
    }
    let total = sets.len().max(1) as f64;
    view_frequency.iter_mut().chain(set_size_frequency.iter_mut()).for_each(|f| *f /= total);

    Ok(LabelOutput {
        labels: sets.into_iter().map(|s| (s.clip_id.clone(), s)).collect(),
        view_frequency,
        set_size_frequency,
    })
}

// ---- label file (JSON lines) ----

#[derive(Serialize, Deserialize)]
struct LabelLine {
    clip_id: String,
    labels: Vec<usize>,
    per_captioner: Vec<ViewScores>,
    #[serde(default)]
    policy: AggregationPolicy,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    #[serde(rename = "_provenance")]
    provenance: serde_json::Value,
}

pub fn write_labels<'a>(
    labels: impl IntoIterator<Item = &'a PseudoLabelSet>,
    mut out: impl Write,
    provenance: Option<&serde_json::Value>,
) -> std::io::Result<()> {
    if let Some(p) = provenance {
        serde_json::to_writer(&mut out, &ProvenanceLine { provenance: p.clone() })?;
        out.write_all(b"\n")?;
    }
    for s in labels {
        let line = LabelLine {
            clip_id: s.clip_id.clone(),
            labels: s.labels.iter().copied().collect(),
            per_captioner: s.per_captioner.clone(),
            policy: s.policy,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_labels(
    labels: &BTreeMap<String, PseudoLabelSet>,
    path: impl AsRef<Path>,
    provenance: Option<&serde_json::Value>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_labels(labels.values(), &mut w, provenance).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labels(reader: impl BufRead, origin: &Path) -> Result<BTreeMap<String, PseudoLabelSet>> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.starts_with("{\"_provenance\"") {
            continue;
        }
        let parsed: LabelLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if parsed.labels.is_empty() {
            return Err(Error::invalid(&parsed.clip_id, "labels: empty pseudo-label set"));
        }
        out.insert(
            parsed.clip_id.clone(),
            PseudoLabelSet {
                clip_id: parsed.clip_id,
                labels: parsed.labels.into_iter().collect(),
                per_captioner: parsed.per_captioner,
                policy: parsed.policy,
            },
        );
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, PseudoLabelSet>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_labels(BufReader::new(file), path)
}
