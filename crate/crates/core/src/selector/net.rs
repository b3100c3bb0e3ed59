//! Forward passes, losses and their exact gradients.

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::params::SelectorParams;
use crate::error::{Error, Result};
use crate::posegeom::{PoseLabelTable, N_HEADS};

fn check_features(params: &SelectorParams, features: &[&[f64]]) -> Result<()> {
    if features.len() != params.n_views {
        return Err(Error::Dimension(format!(
            "got {} views, selector expects {}",
            features.len(),
            params.n_views
        )));
    }
    check_feature(params, features.iter().copied())
}

fn check_feature<'a>(params: &SelectorParams, features: impl Iterator<Item = &'a [f64]>) -> Result<()> {
    for f in features {
        if f.len() != params.f_dim {
            return Err(Error::Dimension(format!(
                "feature length {}, selector expects {}",
                f.len(),
                params.f_dim
            )));
        }
    }
    Ok(())
}

struct ViewCache {
    concat: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

fn view_pass(params: &SelectorParams, features: &[&[f64]]) -> ViewCache {
    let concat: Vec<f64> = features.iter().flat_map(|f| params.proj_w.forward(f)).collect();
    let hidden: Vec<f64> = params.head_w1.forward(&concat).into_iter().map(f64::tanh).collect();
    let logits = params.head_w2.forward(&hidden);
    ViewCache {
        concat,
        hidden,
        logits,
    }
}

struct PairCache {
    concat: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

fn pair_pass(params: &SelectorParams, hi: &[f64], hj: &[f64]) -> PairCache {
    let concat: Vec<f64> = hi.iter().chain(hj).copied().collect();
    let hidden: Vec<f64> = params.head_p1.forward(&concat).into_iter().map(f64::tanh).collect();
    let logits = params.head_p2.forward(&hidden);
    PairCache {
        concat,
        hidden,
        logits,
    }
}

/// View-classifier logits, one per view.
pub fn forward_view(params: &SelectorParams, features: &[&[f64]]) -> Result<Vec<f64>> {
    check_features(params, features)?;
    Ok(view_pass(params, features).logits)
}

/// Pose-head logits for the ordered pair `(i, j)`, laid out head by head
/// (see [`crate::posegeom::HeadLayout::offsets`]).
pub fn forward_pose(params: &SelectorParams, f_i: &[f64], f_j: &[f64]) -> Result<Vec<f64>> {
    check_feature(params, [f_i, f_j].into_iter())?;
    let hi = params.proj_p.forward(f_i);
    let hj = params.proj_p.forward(f_j);
    Ok(pair_pass(params, &hi, &hj).logits)
}

/// Pose logits for all `N^2` ordered pairs, row-major.
pub fn forward_pose_all(params: &SelectorParams, features: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    check_features(params, features)?;
    let proj: Vec<Vec<f64>> = features.iter().map(|f| params.proj_p.forward(f)).collect();
    Ok(proj
        .iter()
        .flat_map(|hi| proj.iter().map(move |hj| (hi, hj)))
        .map(|(hi, hj)| pair_pass(params, hi, hj).logits)
        .collect())
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| (z - max) - log_sum).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

/// Natural-log cross-entropy of `logits` against class `target`.
pub fn cross_entropy(logits: &[f64], target: usize) -> f64 {
    -log_softmax(logits)[target]
}

/// The label with the smallest cross-entropy, ties to the lowest index.
fn easiest_label(logits: &[f64], labels: &BTreeSet<usize>) -> Result<(usize, f64)> {
    let n = logits.len();
    let logp = log_softmax(logits);
    let mut best: Option<(usize, f64)> = None;
    for &b in labels {
        if b >= n {
            return Err(Error::InvalidArgument(format!("label {b} out of range for {n} views")));
        }
        let ce = -logp[b];
        if best.is_none_or(|(_, v)| ce < v) {
            best = Some((b, ce));
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty pseudo-label set".into()))
}

/// Min over the pseudo-labels of the cross-entropy to that label.
pub fn loss_view(logits: &[f64], labels: &BTreeSet<usize>) -> Result<f64> {
    easiest_label(logits, labels).map(|(_, ce)| ce)
}

fn pair_loss(params: &SelectorParams, logits: &[f64], classes: [usize; N_HEADS]) -> f64 {
    let sizes = params.layout.head_sizes();
    let offsets = params.layout.offsets();
    (0..N_HEADS)
        .map(|h| cross_entropy(&logits[offsets[h]..offsets[h] + sizes[h]], classes[h]))
        .sum::<f64>()
        / N_HEADS as f64
}

/// Mean over all `N^2` ordered pairs of the per-pair mean head cross-entropy.
pub fn loss_pose(params: &SelectorParams, pair_logits: &[Vec<f64>], table: &PoseLabelTable) -> Result<f64> {
    let n = table.n_views();
    if pair_logits.len() != n * n {
        return Err(Error::Dimension(format!(
            "{} pair logit vectors for {} pairs",
            pair_logits.len(),
            n * n
        )));
    }
    let total_classes = params.layout.total_classes();
    let mut sum = 0.0;
    for ((i, j), label) in table.iter() {
        let logits = &pair_logits[i * n + j];
        if logits.len() != total_classes {
            return Err(Error::Dimension(format!("pair ({i},{j}) has {} logits", logits.len())));
        }
        sum += pair_loss(params, logits, label.classes());
    }
    Ok(sum / (n * n) as f64)
}

/// One training example: per-view features, pseudo-labels and pose labels.
#[derive(Debug, Clone)]
pub struct Sample {
    pub clip_id: String,
    pub features: Vec<Vec<f64>>,
    pub labels: BTreeSet<usize>,
    pub table: PoseLabelTable,
}

impl Sample {
    pub fn feature_refs(&self) -> Vec<&[f64]> {
        self.features.iter().map(Vec::as_slice).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub view: f64,
    pub pose: f64,
}

/// `(L^S, L^W, L^P)` for one sample with `L^S = L^W + w L^P`.
pub fn total_loss(params: &SelectorParams, sample: &Sample, w: f64) -> Result<LossParts> {
    let feats = sample.feature_refs();
    let view = loss_view(&forward_view(params, &feats)?, &sample.labels)?;
    let pose = loss_pose(params, &forward_pose_all(params, &feats)?, &sample.table)?;
    Ok(LossParts {
        total: view + w * pose,
        view,
        pose,
    })
}

/// Mean of the loss parts over a batch.
pub fn batch_loss(params: &SelectorParams, batch: &[&Sample], w: f64) -> Result<LossParts> {
    let parts = batch
        .par_iter()
        .map(|s| total_loss(params, s, w))
        .collect::<Result<Vec<_>>>()?;
    let n = parts.len().max(1) as f64;
    let mut acc = LossParts {
        total: 0.0,
        view: 0.0,
        pose: 0.0,
    };
    for p in parts {
        acc.total += p.total;
        acc.view += p.view;
        acc.pose += p.pose;
    }
    acc.total /= n;
    acc.view /= n;
    acc.pose /= n;
    Ok(acc)
}

fn tanh_backward(hidden: &[f64], dh: &[f64]) -> Vec<f64> {
    hidden.iter().zip(dh).map(|(h, g)| g * (1.0 - h * h)).collect()
}

/// Gradient of one sample's `L^S`, accumulated into `grad`.
fn accumulate_sample(params: &SelectorParams, sample: &Sample, w: f64, grad: &mut SelectorParams) -> Result<LossParts> {
    let feats = sample.feature_refs();
    check_features(params, &feats)?;
    let n = params.n_views;
    let h = params.h_dim;

    // View classifier. The min only routes gradient through the easiest label.
    let vc = view_pass(params, &feats);
    let (target, view_loss) = easiest_label(&vc.logits, &sample.labels)?;
    let mut dlogits = softmax(&vc.logits);
    dlogits[target] -= 1.0;
    let dhidden = grad.head_w2.backward(&params.head_w2, &vc.hidden, &dlogits);
    let dpre = tanh_backward(&vc.hidden, &dhidden);
    let dconcat = grad.head_w1.backward(&params.head_w1, &vc.concat, &dpre);
    for (v, f) in feats.iter().enumerate() {
        grad.proj_w.backward(&params.proj_w, f, &dconcat[v * h..(v + 1) * h]);
    }

    // Pose predictor over all ordered pairs.
    let table = &sample.table;
    if table.n_views() != n {
        return Err(Error::Dimension(format!(
            "pose table for {} views, selector expects {n}",
            table.n_views()
        )));
    }
    let sizes = params.layout.head_sizes();
    let offsets = params.layout.offsets();
    let proj: Vec<Vec<f64>> = feats.iter().map(|f| params.proj_p.forward(f)).collect();
    let mut dproj = vec![vec![0.0; h]; n];
    let pair_scale = w / ((n * n) as f64 * N_HEADS as f64);
    let mut pose_sum = 0.0;
    for ((i, j), label) in table.iter() {
        let pc = pair_pass(params, &proj[i], &proj[j]);
        pose_sum += pair_loss(params, &pc.logits, label.classes());
        if pair_scale == 0.0 {
            continue;
        }
        let mut dl = vec![0.0; pc.logits.len()];
        for (hd, &cls) in label.classes().iter().enumerate() {
            let block = offsets[hd]..offsets[hd] + sizes[hd];
            let p = softmax(&pc.logits[block.clone()]);
            for (k, pk) in p.into_iter().enumerate() {
                dl[offsets[hd] + k] = pair_scale * (pk - if k == cls { 1.0 } else { 0.0 });
            }
        }
        let dhid = grad.head_p2.backward(&params.head_p2, &pc.hidden, &dl);
        let dpre = tanh_backward(&pc.hidden, &dhid);
        let dcat = grad.head_p1.backward(&params.head_p1, &pc.concat, &dpre);
        for k in 0..h {
            dproj[i][k] += dcat[k];
            dproj[j][k] += dcat[h + k];
        }
    }
    for (f, d) in feats.iter().zip(&dproj) {
        grad.proj_p.backward(&params.proj_p, f, d);
    }
    let pose = pose_sum / (n * n) as f64;
    Ok(LossParts {
        total: view_loss + w * pose,
        view: view_loss,
        pose,
    })
}

/// Exact gradient of the batch-mean `L^S` and the batch-mean loss parts.
///
/// Per-sample gradients may be computed in parallel; they are summed in
/// batch order so the result does not depend on scheduling.
pub fn gradient(params: &SelectorParams, batch: &[&Sample], w: f64) -> Result<(SelectorParams, LossParts)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("gradient of an empty batch".into()));
    }
    let per_sample = batch
        .par_iter()
        .map(|s| {
            let mut g = params.zeros_like();
            let parts = accumulate_sample(params, s, w, &mut g)?;
            Ok((g, parts))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut parts = LossParts {
        total: 0.0,
        view: 0.0,
        pose: 0.0,
    };
    for (g, p) in &per_sample {
        grad.add_scaled(g, scale);
        parts.total += p.total * scale;
        parts.view += p.view * scale;
        parts.pose += p.pose * scale;
    }
    if !grad.is_finite() || !parts.total.is_finite() {
        return Err(Error::NonFinite(format!(
            "gradient or loss (loss = {}) over batch starting at clip {}",
            parts.total, batch[0].clip_id
        )));
    }
    Ok((grad, parts))
}
