//! CIDEr-D: TF-IDF n-gram cosine similarity with count clipping and a
//! Gaussian length penalty, scaled to `[0, 10]`.

use std::collections::BTreeMap;

use super::idf::{ngrams, IdfTable, MAX_N};
use super::TokenSeq;

/// Width of the Gaussian length penalty.
pub const SIGMA: f64 = 6.0;

struct TfIdf {
    /// n-gram -> (raw count, count * idf)
    weights: BTreeMap<String, (usize, f64)>,
    norm: f64,
}

fn tf_idf(tokens: &TokenSeq, n: usize, idf: &IdfTable) -> TfIdf {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for g in ngrams(tokens.tokens(), n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    let weights: BTreeMap<String, (usize, f64)> = counts
        .into_iter()
        .map(|(g, c)| {
            let w = c as f64 * idf.idf(n, &g);
            (g, (c, w))
        })
        .collect();
    let norm = weights.values().map(|(_, w)| w * w).sum::<f64>().sqrt();
    TfIdf { weights, norm }
}

/// Clipped cosine between candidate and reference TF-IDF vectors of one order.
fn clipped_cosine(cand: &TfIdf, reference: &TfIdf) -> f64 {
    if cand.norm == 0.0 || reference.norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = reference
        .weights
        .iter()
        .filter_map(|(g, &(_, wr))| cand.weights.get(g).map(|&(_, wc)| wc.min(wr) * wr))
        .sum();
    dot / (cand.norm * reference.norm)
}

pub fn length_penalty(cand_len: usize, ref_len: usize) -> f64 {
    let delta = cand_len as f64 - ref_len as f64;
    (-(delta * delta) / (2.0 * SIGMA * SIGMA)).exp()
}

/// CIDEr-D of one candidate against one reference.
///
/// Candidate n-gram weights are clipped to the reference weights in the dot
/// product; both norms use the unclipped vectors. Unseen n-grams get
/// `df = 1`. A zero-norm side contributes 0 for that order.
pub fn cider_d(candidate: &TokenSeq, reference: &TokenSeq, idf: &IdfTable) -> f64 {
    let penalty = length_penalty(candidate.len(), reference.len());
    let total: f64 = (1..=MAX_N)
        .map(|n| clipped_cosine(&tf_idf(candidate, n, idf), &tf_idf(reference, n, idf)))
        .sum();
    (10.0 / MAX_N as f64 * penalty * total).clamp(0.0, 10.0)
}
