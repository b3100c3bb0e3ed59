use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IteratorRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::{batch_loss, forward_view, gradient, LossParts, Sample};
use super::params::SelectorParams;
use crate::corpus::{Clip, Corpus};
use crate::error::{Error, Result};
use crate::posegeom::{HeadLayout, PoseLabelTable};
use crate::pseudolabel::PseudoLabelSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Weight of the pose loss in `L^S = L^W + w L^P`.
    pub w: f64,
    pub learning_rate: f64,
    pub h_dim: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs of rising validation loss.
    pub patience: usize,
    pub seed: u64,
    /// Train on one pseudo-label drawn at random per clip with plain
    /// cross-entropy instead of the min over the whole label set.
    pub single_label: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            w: 0.5,
            learning_rate: 0.1,
            h_dim: 16,
            batch_size: 16,
            max_epochs: 200,
            patience: 5,
            seed: 0,
            single_label: false,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.w >= 0.0 && self.w.is_finite()) {
            return Err(Error::InvalidArgument(format!("w must be >= 0, got {}", self.w)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.h_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("h_dim and batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_view: f64,
    pub train_pose: f64,
    pub train_total: f64,
    pub val_total: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Last epoch that ran (0 when no epoch ran).
    pub stopped_epoch: usize,
    /// Epoch whose parameters were returned (0 = initialization).
    pub best_epoch: usize,
}

impl TrainHistory {
    /// CSV training log: `epoch,L^W,L^P,L^S,val_LS,val_acc`.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "epoch,L^W,L^P,L^S,val_LS,val_acc")?;
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                e.epoch, e.train_view, e.train_pose, e.train_total, e.val_total, e.val_accuracy
            )?;
        }
        Ok(())
    }
}

/// Pair each clip with its pseudo-labels and pose table.
pub fn build_samples(
    corpus: &Corpus,
    labels: &BTreeMap<String, PseudoLabelSet>,
    tables: &BTreeMap<String, PoseLabelTable>,
) -> Result<Vec<Sample>> {
    corpus
        .clips()
        .iter()
        .map(|clip| {
            let l = labels
                .get(&clip.clip_id)
                .ok_or_else(|| Error::invalid(&clip.clip_id, "no pseudo-labels"))?;
            let t = tables
                .get(&clip.clip_id)
                .ok_or_else(|| Error::invalid(&clip.clip_id, "no pose-label table"))?;
            if l.labels.iter().any(|&b| b >= clip.n_views()) || l.labels.is_empty() {
                return Err(Error::invalid(&clip.clip_id, "labels: out of range or empty"));
            }
            Ok(Sample {
                clip_id: clip.clip_id.clone(),
                features: clip.views.iter().map(|v| v.feature.clone()).collect(),
                labels: l.labels.clone(),
                table: t.clone(),
            })
        })
        .collect()
}

/// Best view (ties to the lowest index) and all views by descending logit.
pub fn select_from_logits(logits: &[f64]) -> (usize, Vec<usize>) {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    (order[0], order)
}

pub fn select(params: &SelectorParams, clip: &Clip) -> Result<(usize, Vec<usize>)> {
    let logits = forward_view(params, &clip.features())?;
    Ok(select_from_logits(&logits))
}

fn accuracy(params: &SelectorParams, samples: &[Sample]) -> Result<f64> {
    let mut hits = 0usize;
    for s in samples {
        let (best, _) = select_from_logits(&forward_view(params, &s.feature_refs())?);
        hits += usize::from(s.labels.contains(&best));
    }
    Ok(hits as f64 / samples.len().max(1) as f64)
}

fn check_finite(parts: &LossParts, what: &str, epoch: usize) -> Result<()> {
    if parts.total.is_finite() && parts.view.is_finite() && parts.pose.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!(
            "{what} loss diverged at epoch {epoch} (L^W = {}, L^P = {}); try a smaller learning rate",
            parts.view, parts.pose
        )))
    }
}

/// Mini-batch gradient descent with early stopping on validation `L^S`.
/// Returns the parameters from the epoch with the lowest validation loss.
pub fn train(
    train: &[Sample],
    val: &[Sample],
    layout: HeadLayout,
    cfg: &TrainConfig,
) -> Result<(SelectorParams, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("train and val splits must be non-empty".into()));
    }
    let n_views = train[0].features.len();
    let f_dim = train[0].features[0].len();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = SelectorParams::init(n_views, f_dim, cfg.h_dim, layout, &mut rng);
    let mut history = TrainHistory::default();
    if cfg.max_epochs == 0 {
        return Ok((params, history));
    }

    let train_samples: Vec<Sample> = if cfg.single_label {
        train
            .iter()
            .map(|s| {
                let pick = *s.labels.iter().choose(&mut rng).expect("labels non-empty");
                Sample {
                    labels: BTreeSet::from([pick]),
                    ..s.clone()
                }
            })
            .collect()
    } else {
        train.to_vec()
    };
    let train_refs: Vec<&Sample> = train_samples.iter().collect();
    let val_refs: Vec<&Sample> = val.iter().collect();

    let mut best_val = batch_loss(&params, &val_refs, cfg.w)?.total;
    let mut best_params = params.clone();
    let mut prev_val = best_val;
    let mut rising = 0usize;
    let mut order: Vec<usize> = (0..train_samples.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_samples[i]).collect();
            let (grad, parts) = gradient(&params, &batch, cfg.w)?;
            check_finite(&parts, "train", epoch)?;
            params.add_scaled(&grad, -cfg.learning_rate);
        }
        let tr = batch_loss(&params, &train_refs, cfg.w)?;
        check_finite(&tr, "train", epoch)?;
        let va = batch_loss(&params, &val_refs, cfg.w)?;
        check_finite(&va, "validation", epoch)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_view: tr.view,
            train_pose: tr.pose,
            train_total: tr.total,
            val_total: va.total,
            val_accuracy: accuracy(&params, val)?,
        });
        history.stopped_epoch = epoch;

        if va.total < best_val {
            best_val = va.total;
            best_params = params.clone();
            history.best_epoch = epoch;
        }
        rising = if va.total > prev_val { rising + 1 } else { 0 };
        prev_val = va.total;
        if rising >= cfg.patience.max(1) {
            break;
        }
    }
    Ok((best_params, history))
}

// ---- checkpoints ----

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: TrainConfig,
    pub params: SelectorParams,
    pub history: TrainHistory,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, params: SelectorParams, history: TrainHistory) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            config,
            params,
            history,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "{}: checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                path.display(),
                ck.version
            )));
        }
        ck.params.check_consistent()?;
        Ok(ck)
    }
}
