//! METEOR restricted to the exact and stem matching stages.

use std::collections::HashMap;

use super::stem::stem;
use super::TokenSeq;

pub const ALPHA: f64 = 0.9;
pub const BETA: f64 = 3.0;
pub const GAMMA: f64 = 0.5;

/// Upper bound on search nodes per sentence pair; past it the best
/// alignment found so far is kept.
const SEARCH_BUDGET: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeteorBreakdown {
    pub matches: usize,
    pub chunks: usize,
    pub precision: f64,
    pub recall: f64,
    pub fmean: f64,
    pub penalty: f64,
    pub score: f64,
}

pub fn meteor_lite(candidate: &TokenSeq, reference: &TokenSeq) -> f64 {
    meteor_breakdown(candidate, reference).score
}

pub fn meteor_breakdown(candidate: &TokenSeq, reference: &TokenSeq) -> MeteorBreakdown {
    let (matches, chunks) = align(candidate.tokens(), reference.tokens());
    if matches == 0 {
        return MeteorBreakdown {
            matches: 0,
            chunks: 0,
            precision: 0.0,
            recall: 0.0,
            fmean: 0.0,
            penalty: 0.0,
            score: 0.0,
        };
    }
    let m = matches as f64;
    let precision = m / candidate.len() as f64;
    let recall = m / reference.len() as f64;
    let fmean = precision * recall / (ALPHA * precision + (1.0 - ALPHA) * recall);
    let penalty = GAMMA * (chunks as f64 / m).powf(BETA);
    MeteorBreakdown {
        matches,
        chunks,
        precision,
        recall,
        fmean,
        penalty,
        score: fmean * (1.0 - penalty),
    }
}

/// Returns `(matches, chunks)` of the alignment that first maximizes exact
/// matches, then stem matches, then has the fewest chunks.
///
/// Candidate tokens are visited left to right; for each one the reference
/// position continuing the current chunk is tried first, then positions in
/// increasing order, so the first complete alignment is the greedy one.
fn align(cand: &[String], reference: &[String]) -> (usize, usize) {
    let cand_stems: Vec<String> = cand.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = reference.iter().map(|t| stem(t)).collect();

    let c_words = count(cand);
    let r_words = count(reference);
    let exact_target: usize = c_words
        .iter()
        .map(|(w, &c)| c.min(r_words.get(w).copied().unwrap_or(0)))
        .sum();

    // Leftover tokens per stem class after the exact stage.
    let mut c_rem: HashMap<&str, usize> = HashMap::new();
    let mut r_rem: HashMap<&str, usize> = HashMap::new();
    for (w, &c) in &c_words {
        let left = c - c.min(r_words.get(w).copied().unwrap_or(0));
        if left > 0 {
            *c_rem.entry(stem_of(cand, &cand_stems, w)).or_insert(0) += left;
        }
    }
    for (w, &r) in &r_words {
        let left = r - r.min(c_words.get(w).copied().unwrap_or(0));
        if left > 0 {
            *r_rem.entry(stem_of(reference, &ref_stems, w)).or_insert(0) += left;
        }
    }
    let stem_target: usize = c_rem
        .iter()
        .map(|(s, &c)| c.min(r_rem.get(s).copied().unwrap_or(0)))
        .sum();

    let total = exact_target + stem_target;
    if total == 0 {
        return (0, 0);
    }

    let mut search = Search {
        cand,
        reference,
        cand_stems: &cand_stems,
        ref_stems: &ref_stems,
        exact_target,
        stem_target,
        used: vec![false; reference.len()],
        best_chunks: usize::MAX,
        nodes: 0,
    };
    search.visit(0, 0, 0, None, 0);
    debug_assert!(search.best_chunks != usize::MAX);
    (total, search.best_chunks)
}

fn count(xs: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for x in xs {
        *m.entry(x.as_str()).or_insert(0) += 1;
    }
    m
}

fn stem_of<'a>(tokens: &[String], stems: &'a [String], word: &str) -> &'a str {
    let i = tokens.iter().position(|t| t == word).expect("word comes from tokens");
    stems[i].as_str()
}

struct Search<'a> {
    cand: &'a [String],
    reference: &'a [String],
    cand_stems: &'a [String],
    ref_stems: &'a [String],
    exact_target: usize,
    stem_target: usize,
    used: Vec<bool>,
    best_chunks: usize,
    nodes: usize,
}

impl Search<'_> {
    fn visit(&mut self, i: usize, exact: usize, stemmed: usize, last: Option<(usize, usize)>, chunks: usize) {
        self.nodes += 1;
        if chunks >= self.best_chunks {
            return;
        }
        let needed = (self.exact_target - exact) + (self.stem_target - stemmed);
        if needed == 0 {
            self.best_chunks = chunks;
            return;
        }
        if i == self.cand.len() || self.cand.len() - i < needed || self.nodes > SEARCH_BUDGET {
            return;
        }

        let adjacent = last
            .filter(|&(li, lj)| li + 1 == i && lj + 1 < self.reference.len())
            .map(|(_, lj)| lj + 1);
        let options = adjacent
            .into_iter()
            .chain((0..self.reference.len()).filter(|&j| Some(j) != adjacent));

        for j in options {
            if self.used[j] {
                continue;
            }
            let is_exact = self.cand[i] == self.reference[j];
            let is_stem = !is_exact && self.cand_stems[i] == self.ref_stems[j];
            let (e, s) = match (is_exact, is_stem) {
                (true, _) if exact < self.exact_target => (exact + 1, stemmed),
                (false, true) if stemmed < self.stem_target => (exact, stemmed + 1),
                _ => continue,
            };
            let continues = matches!(last, Some((li, lj)) if li + 1 == i && lj + 1 == j);
            self.used[j] = true;
            self.visit(i + 1, e, s, Some((i, j)), chunks + usize::from(!continues));
            self.used[j] = false;
        }
        self.visit(i + 1, exact, stemmed, last, chunks);
    }
}
