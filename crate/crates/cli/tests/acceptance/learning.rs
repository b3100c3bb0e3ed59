use std::collections::{BTreeMap, BTreeSet};

use bestview_core::corpus::{CameraExtrinsics, Clip, ViewRecord};
use bestview_core::posegeom::{pose_label_table, rotation_from_euler, HeadLayout};
use bestview_core::selector::{batch_loss, forward_pose_all, forward_view, gradient, loss_pose, loss_view, Sample, SelectorParams};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, oracles, Check};

const FD_EPS: f64 = 1e-5;
const FD_MAX_REL_ERR: f64 = 1e-4;
/// Denominator floor so parameters with near-zero gradient are compared absolutely.
const FD_REL_FLOOR: f64 = 1e-6;
const POSE_ORACLE_TOL: f64 = 1e-12;

fn random_clip(rng: &mut impl Rng, id: &str, n: usize, f_dim: usize) -> Clip {
    let views = (0..n)
        .map(|v| {
            let r = rotation_from_euler(
                rng.gen_range(-180.0..180.0),
                rng.gen_range(-80.0..80.0),
                rng.gen_range(-180.0..180.0),
            );
            let c = Vector3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0));
            ViewRecord {
                view_id: format!("v{v}"),
                is_ego: v == 0,
                feature: (0..f_dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                extrinsics: CameraExtrinsics::from_center(r, c),
                captions: BTreeMap::from([("k".to_string(), "c cuts".to_string())]),
            }
        })
        .collect();
    Clip {
        clip_id: id.into(),
        views,
        narration: "c cuts".into(),
    }
}

fn random_sample(rng: &mut impl Rng, id: &str, n: usize, f_dim: usize) -> Sample {
    let clip = random_clip(rng, id, n, f_dim);
    let mut labels = BTreeSet::new();
    while labels.is_empty() {
        labels = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
    }
    Sample {
        clip_id: id.into(),
        features: clip.views.iter().map(|v| v.feature.clone()).collect(),
        labels,
        table: pose_label_table(&clip, 30).expect("valid clip"),
    }
}

fn random_params(rng: &mut ChaCha8Rng, n: usize, f_dim: usize, h_dim: usize) -> SelectorParams {
    let mut p = SelectorParams::init(n, f_dim, h_dim, HeadLayout::new(30).unwrap(), rng);
    let flat: Vec<f64> = p.to_flat().into_iter().map(|x| x + rng.gen_range(-0.3..0.3)).collect();
    p.set_flat(&flat).unwrap();
    p
}

pub fn gradient_check() -> Check {
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..50u64 {
        for w in [0.0, 0.5] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = random_params(&mut rng, 3, 4, 3);
            let samples: Vec<Sample> = (0..2).map(|i| random_sample(&mut rng, &format!("s{i}"), 3, 4)).collect();
            let batch: Vec<&Sample> = samples.iter().collect();
            let (grad, _) = gradient(&params, &batch, w).map_err(|e| e.to_string())?;
            let g = grad.to_flat();
            let base = params.to_flat();
            let mut probe = params.clone();
            for k in 0..base.len() {
                let mut x = base.clone();
                x[k] = base[k] + FD_EPS;
                probe.set_flat(&x).unwrap();
                let up = batch_loss(&probe, &batch, w).unwrap().total;
                x[k] = base[k] - FD_EPS;
                probe.set_flat(&x).unwrap();
                let down = batch_loss(&probe, &batch, w).unwrap().total;
                let fd = (up - down) / (2.0 * FD_EPS);
                let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(FD_REL_FLOOR);
                worst = worst.max(rel);
                checked += 1;
                ensure!(
                    rel < FD_MAX_REL_ERR,
                    "seed {seed}, w {w}, param {k}: analytic {} vs finite difference {fd} (rel err {rel:.2e})",
                    g[k]
                );
            }
        }
    }
    Ok(format!("{checked} partials over 50 seeds x w in {{0, 0.5}}; max rel err {worst:.2e}"))
}

pub fn view_loss_structure() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut cases = 0;
    for _ in 0..2000 {
        let n = rng.gen_range(2..8);
        let dyadic = rng.gen_bool(0.5);
        let logits: Vec<f64> = (0..n)
            .map(|_| {
                if dyadic {
                    rng.gen_range(-4096i32..4096) as f64 / 1024.0
                } else {
                    rng.gen_range(-8.0..8.0)
                }
            })
            .collect();
        let mut s1: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        s1.insert(rng.gen_range(0..n));
        let mut s2: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        s2.insert(rng.gen_range(0..n));
        let union: BTreeSet<usize> = s1.union(&s2).copied().collect();
        let (l1, l2, lu) = (
            loss_view(&logits, &s1).unwrap(),
            loss_view(&logits, &s2).unwrap(),
            loss_view(&logits, &union).unwrap(),
        );
        ensure!(lu == l1.min(l2), "union {lu} != min({l1}, {l2}) for logits {logits:?}");

        let shift = if dyadic {
            rng.gen_range(-64i32..64) as f64
        } else {
            rng.gen_range(-50.0..50.0)
        };
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        let ls = loss_view(&shifted, &union).unwrap();
        if dyadic {
            // Dyadic logits and integer shifts are exact in binary64.
            ensure!(ls == lu, "shift {shift}: {ls} != {lu} (exact case)");
        } else {
            ensure!((ls - lu).abs() <= 1e-12 * lu.abs().max(1.0), "shift {shift}: {ls} vs {lu}");
        }
        cases += 1;
    }
    Ok(format!(
        "{cases} fuzz cases: union loss equals min exactly; shift-invariant exactly on dyadic logits, within 1e-12 otherwise"
    ))
}

pub fn pose_loss_structure() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let params = random_params(&mut rng, 2, 5, 4);
        let s = random_sample(&mut rng, "pair", 2, 5);
        ensure!(s.table.len() == 4, "table has {} entries, expected N^2 = 4", s.table.len());
        let refs = s.feature_refs();
        let lib = loss_pose(&params, &forward_pose_all(&params, &refs).unwrap(), &s.table).unwrap();
        let oracle = oracles::pose_loss(&params, &s.features, &s.table);
        worst = worst.max((lib - oracle).abs());
        ensure!((lib - oracle).abs() <= POSE_ORACLE_TOL, "seed {seed}: loss_pose {lib} vs flat loop {oracle}");

        let view = forward_view(&params, &refs).unwrap();
        let want = oracles::view_logits(&params, &s.features);
        ensure!(
            view.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-12),
            "view logits {view:?} vs oracle {want:?}"
        );
    }
    Ok(format!("20 random N = 2 fixtures (4 pairs incl. self pairs); max |diff| {worst:.1e}"))
}
