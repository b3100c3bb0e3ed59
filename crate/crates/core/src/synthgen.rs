//! Synthetic multi-view corpora with a planted best view per clip.
//!
//! Every clip gets a narration from a small template grammar. View `v` has
//! a quality `q_v`: the planted view has `q = 1`, the others are drawn below
//! `max_other_quality`. Each captioner's caption for a view is the narration
//! with every token independently replaced (by a different vocabulary token)
//! with probability `rho * ((1 - q_v) + eta)`, where `eta` is a small
//! per-captioner, per-view jitter. Features are `snr * q_v * u + noise` for a
//! corpus-wide unit direction `u`. View 0 is the ego camera at the center of
//! a ring of inward-looking exo cameras.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CameraExtrinsics, Clip, Corpus, ViewRecord};
use crate::error::{Error, Result};

const VERBS: &[&str] = &[
    "cuts", "picks", "places", "holds", "opens", "removes", "turns", "stirs", "pours", "washes", "lifts",
    "adjusts", "tightens", "wipes", "presses", "attaches", "checks", "peels", "folds", "rinses",
];
const NOUNS: &[&str] = &[
    "onion", "knife", "board", "pot", "pan", "wheel", "tire", "wrench", "bowl", "cup", "spoon", "lid", "bottle",
    "towel", "chain", "pedal", "plate", "tomato", "carrot", "sponge", "valve", "handle", "dough", "brush",
];
const ADJECTIVES: &[&str] = &[
    "red", "small", "large", "rear", "front", "wooden", "metal", "plastic", "hot", "wet", "left", "right",
];
const DETERMINERS: &[&str] = &["the", "a", "the", "his", "the"];
const PREPOSITIONS: &[&str] = &["with", "on", "from", "into", "near"];
const SCENE_FILLER: &[&str] = &[
    "the", "wall", "is", "white", "and", "there", "a", "lamp", "window", "in", "background", "behind", "shelf",
    "ceiling", "light", "bright", "room", "corner", "curtain", "poster",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_clips: usize,
    pub n_views: usize,
    pub f_dim: usize,
    pub n_captioners: usize,
    /// Size of the replacement vocabulary (grammar words first, then filler tokens).
    pub vocab_size: usize,
    /// Minimum narration length in tokens.
    pub narration_len: usize,
    /// Corruption rate `rho` in `[0, 1]`.
    pub corruption_rate: f64,
    /// Upper bound of the per-captioner replacement jitter `eta`.
    pub captioner_noise: f64,
    /// Non-planted qualities are drawn from `[0, max_other_quality)`.
    pub max_other_quality: f64,
    /// Signal amplitude relative to unit-norm feature noise.
    pub feature_snr: f64,
    pub camera_radius: f64,
    /// When positive, each view gets a quality-independent verbosity and its
    /// captions get up to this many irrelevant scene tokens appended.
    pub verbose_extra_tokens: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_clips: 200,
            n_views: 5,
            f_dim: 16,
            n_captioners: 3,
            vocab_size: 200,
            narration_len: 10,
            corruption_rate: 0.3,
            captioner_noise: 0.05,
            max_other_quality: 0.7,
            feature_snr: 4.0,
            camera_radius: 2.0,
            verbose_extra_tokens: 0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("synth config: {m}")));
        if self.n_clips == 0 || self.f_dim == 0 || self.n_captioners == 0 || self.narration_len == 0 {
            return bad("n_clips, f_dim, n_captioners and narration_len must be positive");
        }
        if self.n_views < 2 {
            return bad("n_views must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.corruption_rate) {
            return bad("corruption_rate must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.captioner_noise) {
            return bad("captioner_noise must lie in [0, 1]");
        }
        if !(self.max_other_quality > 0.0 && self.max_other_quality <= 1.0) {
            return bad("max_other_quality must lie in (0, 1]");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must be at least 2");
        }
        if !(self.feature_snr.is_finite() && self.feature_snr >= 0.0) {
            return bad("feature_snr must be finite and non-negative");
        }
        if !(self.camera_radius.is_finite() && self.camera_radius > 0.0) {
            return bad("camera_radius must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub corpus: Corpus,
    /// Planted best view per clip.
    pub planted: BTreeMap<String, usize>,
    /// Per-view quality `q_v` per clip.
    pub quality: BTreeMap<String, Vec<f64>>,
}

pub fn captioner_ids(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("cap{i}")).collect()
}

fn vocabulary(size: usize) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for w in VERBS.iter().chain(NOUNS).chain(ADJECTIVES).chain(PREPOSITIONS).chain(["c", "the", "a", "his", "and"].iter())
    {
        if !words.iter().any(|x| x == w) {
            words.push(w.to_string());
        }
    }
    let mut i = 0;
    while words.len() < size {
        words.push(format!("tok{i}"));
        i += 1;
    }
    words.truncate(size);
    words
}

fn narration(rng: &mut impl Rng, min_len: usize) -> Vec<String> {
    let pick = |rng: &mut _, xs: &[&str]| xs.choose(rng).expect("non-empty").to_string();
    let mut toks = vec!["c".to_string()];
    loop {
        toks.push(pick(rng, VERBS));
        toks.push(pick(rng, DETERMINERS));
        if rng.gen_bool(0.5) {
            toks.push(pick(rng, ADJECTIVES));
        }
        toks.push(pick(rng, NOUNS));
        if rng.gen_bool(0.5) {
            toks.push(pick(rng, PREPOSITIONS));
            toks.push("the".into());
            toks.push(pick(rng, NOUNS));
        }
        if toks.len() >= min_len {
            return toks;
        }
        toks.push("and".into());
    }
}

fn look_at(center: Vector3<f64>, target: Vector3<f64>) -> CameraExtrinsics {
    let up = Vector3::z();
    let fwd = (target - center).normalize();
    let right = fwd.cross(&up).normalize();
    let down = fwd.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
    CameraExtrinsics::from_center(rotation, center)
}

/// Ego camera at the ring center, exo cameras evenly spaced on the ring.
fn camera_rig(n_views: usize, radius: f64, rng: &mut impl Rng) -> Vec<CameraExtrinsics> {
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let heading = rng.gen_range(0.0..std::f64::consts::TAU);
    let focus = Vector3::new(0.0, 0.0, 0.8);
    let ego_center = Vector3::new(0.0, 0.0, 1.6);
    let mut cams = vec![look_at(
        ego_center,
        ego_center + Vector3::new(heading.cos(), heading.sin(), -0.6),
    )];
    let n_exo = n_views - 1;
    for k in 0..n_exo {
        let a = phase + std::f64::consts::TAU * k as f64 / n_exo as f64;
        let c = Vector3::new(radius * a.cos(), radius * a.sin(), 1.2);
        cams.push(look_at(c, focus));
    }
    cams
}

fn corrupt(tokens: &[String], p: f64, vocab: &[String], rng: &mut impl Rng) -> Vec<String> {
    tokens
        .iter()
        .map(|t| {
            if p > 0.0 && rng.gen_bool(p.min(1.0)) {
                loop {
                    let r = vocab.choose(rng).expect("vocab non-empty");
                    if r != t {
                        return r.clone();
                    }
                }
            } else {
                t.clone()
            }
        })
        .collect()
}

struct ClipDraw {
    clip: Clip,
    planted: usize,
    quality: Vec<f64>,
}

fn generate_clip(cfg: &SynthConfig, idx: usize, signal: &[f64], vocab: &[String], caps: &[String]) -> ClipDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(idx as u64 + 1);

    let narration_toks = narration(&mut rng, cfg.narration_len);
    let planted = rng.gen_range(0..cfg.n_views);
    let quality: Vec<f64> = (0..cfg.n_views)
        .map(|v| {
            if v == planted {
                1.0
            } else {
                rng.gen_range(0.0..cfg.max_other_quality)
            }
        })
        .collect();
    let verbosity: Vec<usize> = (0..cfg.n_views)
        .map(|_| {
            if cfg.verbose_extra_tokens == 0 {
                0
            } else {
                (rng.gen_range(0.0..=1.0) * cfg.verbose_extra_tokens as f64).round() as usize
            }
        })
        .collect();
    let cams = camera_rig(cfg.n_views, cfg.camera_radius, &mut rng);
    let noise = Normal::new(0.0, 1.0 / (cfg.f_dim as f64).sqrt()).expect("valid normal");

    let views = (0..cfg.n_views)
        .map(|v| {
            let q = quality[v];
            let captions = caps
                .iter()
                .map(|k| {
                    let eta = rng.gen_range(0.0..=cfg.captioner_noise);
                    let p = cfg.corruption_rate * ((1.0 - q) + eta);
                    let mut toks = corrupt(&narration_toks, p, vocab, &mut rng);
                    for _ in 0..verbosity[v] {
                        toks.push(SCENE_FILLER.choose(&mut rng).expect("non-empty").to_string());
                    }
                    (k.clone(), toks.join(" "))
                })
                .collect();
            let feature = signal
                .iter()
                .map(|u| cfg.feature_snr * q * u + noise.sample(&mut rng))
                .collect();
            ViewRecord {
                view_id: format!("v{v}"),
                is_ego: v == 0,
                feature,
                extrinsics: cams[v].clone(),
                captions,
            }
        })
        .collect();

    ClipDraw {
        clip: Clip {
            clip_id: format!("clip{idx:05}"),
            views,
            narration: narration_toks.join(" "),
        },
        planted,
        quality,
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut signal: Vec<f64> = (0..cfg.f_dim).map(|_| normal.sample(&mut rng)).collect();
    let norm = signal.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    signal.iter_mut().for_each(|x| *x /= norm);

    let vocab = vocabulary(cfg.vocab_size);
    let caps = captioner_ids(cfg.n_captioners);
    let draws: Vec<ClipDraw> = (0..cfg.n_clips)
        .into_par_iter()
        .map(|i| generate_clip(cfg, i, &signal, &vocab, &caps))
        .collect();

    let mut planted = BTreeMap::new();
    let mut quality = BTreeMap::new();
    let mut clips = Vec::with_capacity(draws.len());
    for d in draws {
        planted.insert(d.clip.clip_id.clone(), d.planted);
        quality.insert(d.clip.clip_id.clone(), d.quality);
        clips.push(d.clip);
    }
    Ok(SynthOutput {
        corpus: Corpus::new(caps, cfg.f_dim, clips)?,
        planted,
        quality,
    })
}
