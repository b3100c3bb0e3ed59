//! Slow, direct implementations of the formulas, written without reusing
//! any of the library's metric or network code.

use bestview_core::posegeom::PoseLabelTable;
use bestview_core::selector::{Dense, SelectorParams};
use bestview_core::textmetrics::stem;

fn grams(tokens: &[String], n: usize) -> Vec<Vec<String>> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| tokens[i..i + n].to_vec()).collect()
}

fn count(list: &[Vec<String>], g: &[String]) -> usize {
    list.iter().filter(|x| x.as_slice() == g).count()
}

fn distinct(list: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

/// CIDEr-D of one candidate against one reference, with document
/// frequencies taken over `docs`.
pub fn cider(cand: &[String], refr: &[String], docs: &[Vec<String>]) -> f64 {
    let d = docs.len() as f64;
    let mut total = 0.0;
    for n in 1..=4 {
        let idf = |g: &[String]| {
            let df = docs.iter().filter(|doc| count(&grams(doc, n), g) > 0).count();
            d.ln() - (df.max(1) as f64).ln()
        };
        let cg = grams(cand, n);
        let rg = grams(refr, n);
        let weight = |list: &[Vec<String>], g: &[String]| count(list, g) as f64 * idf(g);
        let norm = |list: &[Vec<String>]| distinct(list).iter().map(|g| weight(list, g).powi(2)).sum::<f64>().sqrt();
        let (nc, nr) = (norm(&cg), norm(&rg));
        if nc == 0.0 || nr == 0.0 {
            continue;
        }
        let dot: f64 = distinct(&cg)
            .iter()
            .map(|g| {
                let (wc, wr) = (weight(&cg, g), weight(&rg, g));
                wc.min(wr) * wr
            })
            .sum();
        let delta = cand.len() as f64 - refr.len() as f64;
        total += (-(delta * delta) / 72.0).exp() * dot / (nc * nr);
    }
    (10.0 * total / 4.0).clamp(0.0, 10.0)
}

struct Best {
    exact: usize,
    total: usize,
    chunks: usize,
}

fn chunks_of(pairs: &[(usize, usize)]) -> usize {
    let mut p = pairs.to_vec();
    p.sort();
    if p.is_empty() {
        return 0;
    }
    1 + p
        .windows(2)
        .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
        .count()
}

#[allow(clippy::too_many_arguments)]
fn enumerate(
    i: usize,
    cand: &[String],
    refr: &[String],
    cs: &[String],
    rs: &[String],
    used: &mut Vec<bool>,
    pairs: &mut Vec<(usize, usize)>,
    exact: usize,
    best: &mut Best,
) {
    if i == cand.len() {
        let (total, ch) = (pairs.len(), chunks_of(pairs));
        let better = (exact, total) > (best.exact, best.total)
            || ((exact, total) == (best.exact, best.total) && ch < best.chunks);
        if better {
            *best = Best {
                exact,
                total,
                chunks: ch,
            };
        }
        return;
    }
    enumerate(i + 1, cand, refr, cs, rs, used, pairs, exact, best);
    for j in 0..refr.len() {
        if used[j] {
            continue;
        }
        let is_exact = cand[i] == refr[j];
        if is_exact || cs[i] == rs[j] {
            used[j] = true;
            pairs.push((i, j));
            enumerate(i + 1, cand, refr, cs, rs, used, pairs, exact + usize::from(is_exact), best);
            pairs.pop();
            used[j] = false;
        }
    }
}

/// METEOR over every possible alignment: most exact matches, then most
/// matches, then fewest chunks.
pub fn meteor(cand: &[String], refr: &[String]) -> f64 {
    let cs: Vec<String> = cand.iter().map(|t| stem(t)).collect();
    let rs: Vec<String> = refr.iter().map(|t| stem(t)).collect();
    let mut best = Best {
        exact: 0,
        total: 0,
        chunks: 0,
    };
    enumerate(0, cand, refr, &cs, &rs, &mut vec![false; refr.len()], &mut Vec::new(), 0, &mut best);
    let m = best.total as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / cand.len() as f64;
    let r = m / refr.len() as f64;
    let f = p * r / (0.9 * p + 0.1 * r);
    f * (1.0 - 0.5 * (best.chunks as f64 / m).powi(3))
}

pub fn iou(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.iter().filter(|x| b.contains(x)).count();
    let mut union: Vec<&String> = a.iter().collect();
    for x in b {
        if !union.contains(&x) {
            union.push(x);
        }
    }
    inter as f64 / union.len() as f64
}

fn affine(d: &Dense, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d.out_dim];
    for (o, yo) in y.iter_mut().enumerate() {
        let mut s = d.bias[o];
        for (k, xk) in x.iter().enumerate() {
            s += d.weight[o * d.in_dim + k] * xk;
        }
        *yo = s;
    }
    y
}

/// Pose loss written as one flat loop over pairs and heads.
pub fn pose_loss(params: &SelectorParams, features: &[Vec<f64>], table: &PoseLabelTable) -> f64 {
    let n = features.len();
    let sizes = params.layout.head_sizes();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut x = affine(&params.proj_p, &features[i]);
            x.extend(affine(&params.proj_p, &features[j]));
            let h: Vec<f64> = affine(&params.head_p1, &x).iter().map(|v| v.tanh()).collect();
            let z = affine(&params.head_p2, &h);
            let classes = table.get(i, j).expect("pair present").classes();
            let mut start = 0;
            let mut pair = 0.0;
            for (head, &size) in sizes.iter().enumerate() {
                let block = &z[start..start + size];
                let lse = block.iter().map(|v| v.exp()).sum::<f64>().ln();
                pair += lse - block[classes[head]];
                start += size;
            }
            total += pair / sizes.len() as f64;
        }
    }
    total / (n * n) as f64
}

/// View-classifier logits, for cross-checking.
pub fn view_logits(params: &SelectorParams, features: &[Vec<f64>]) -> Vec<f64> {
    let x: Vec<f64> = features.iter().flat_map(|f| affine(&params.proj_w, f)).collect();
    let h: Vec<f64> = affine(&params.head_w1, &x).iter().map(|v| v.tanh()).collect();
    affine(&params.head_w2, &h)
}
