//! Multi-view clip corpora: data model, JSON-lines manifests and splitting.
//!
//! A manifest is a JSON-lines file. The first line is a header
//! `{"captioner_ids": [...], "f_dim": int}`; every following line is one clip:
//!
//! ```text
//! {"clip_id": "c0", "narration": "...", "views": [
//!     {"view_id": "v0", "is_ego": true, "feature": [...],
//!      "extrinsics": {"R": [9 reals, row-major], "t": [3 reals]},
//!      "captions": {"captioner": "..."}}, ...]}
//! ```
//!
//! Captions and features are produced by external models and ingested here
//! as plain data.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for orthonormality and determinant checks on rotations.
pub const ROTATION_TOL: f64 = 1e-6;

/// World-to-camera extrinsics: `x_cam = R * x_world + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraExtrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Build extrinsics from a camera center in world coordinates.
    pub fn from_center(rotation: Matrix3<f64>, center: Vector3<f64>) -> Self {
        let translation = -(rotation * center);
        Self::new(rotation, translation)
    }

    /// Camera center in world coordinates, `c = -R^T t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Checks that the rotation is orthonormal with determinant +1.
    pub fn check_rotation(&self) -> std::result::Result<(), String> {
        check_rotation(&self.rotation)
    }
}

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> std::result::Result<(), String> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err("rotation has non-finite entries".into());
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(format!("rotation determinant is {det:.6}, expected +1"));
    }
    let gram = r.transpose() * r;
    let err = (gram - Matrix3::identity()).abs().max();
    if err > ROTATION_TOL {
        return Err(format!("rotation is not orthonormal (max |R^T R - I| = {err:.3e})"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub view_id: String,
    pub is_ego: bool,
    pub feature: Vec<f64>,
    pub extrinsics: CameraExtrinsics,
    /// Predicted narration for this view, keyed by captioner id.
    pub captions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub clip_id: String,
    pub views: Vec<ViewRecord>,
    /// Ground-truth view-agnostic narration.
    pub narration: String,
}

impl Clip {
    pub fn n_views(&self) -> usize {
        self.views.len()
    }

    pub fn ego_index(&self) -> usize {
        self.views
            .iter()
            .position(|v| v.is_ego)
            .expect("validated clip has an ego view")
    }

    pub fn caption(&self, view: usize, captioner_id: &str) -> Result<&str> {
        self.views
            .get(view)
            .and_then(|v| v.captions.get(captioner_id))
            .map(String::as_str)
            .ok_or_else(|| Error::MissingCaption {
                clip_id: self.clip_id.clone(),
                view,
                captioner_id: captioner_id.to_string(),
            })
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.views.iter().map(|v| v.feature.as_slice()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
    Test,
}

/// A validated corpus. Construction goes through [`Corpus::new`], so every
/// value of this type satisfies the corpus invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    clips: Vec<Clip>,
    captioner_ids: Vec<String>,
    f_dim: usize,
    split_tag: Option<SplitTag>,
}

impl Corpus {
    pub fn new(captioner_ids: Vec<String>, f_dim: usize, clips: Vec<Clip>) -> Result<Self> {
        let corpus = Self {
            clips,
            captioner_ids,
            f_dim,
            split_tag: None,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn with_split_tag(mut self, tag: Option<SplitTag>) -> Self {
        self.split_tag = tag;
        self
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn captioner_ids(&self) -> &[String] {
        &self.captioner_ids
    }

    pub fn f_dim(&self) -> usize {
        self.f_dim
    }

    pub fn split_tag(&self) -> Option<SplitTag> {
        self.split_tag
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// Number of views per clip, or `None` for an empty corpus.
    pub fn n_views(&self) -> Option<usize> {
        self.clips.first().map(Clip::n_views)
    }

    pub fn clip(&self, clip_id: &str) -> Option<&Clip> {
        self.clips.iter().find(|c| c.clip_id == clip_id)
    }

    /// Keep only the clips whose ids satisfy `keep`, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&Clip) -> bool) -> Corpus {
        Corpus {
            clips: self.clips.iter().filter(|c| keep(c)).cloned().collect(),
            captioner_ids: self.captioner_ids.clone(),
            f_dim: self.f_dim,
            split_tag: self.split_tag,
        }
    }

    /// Same clips, but only the given captioner's captions are kept.
    pub fn restrict_captioners(&self, ids: &[String]) -> Result<Corpus> {
        for id in ids {
            if !self.captioner_ids.contains(id) {
                return Err(Error::InvalidArgument(format!("unknown captioner {id}")));
            }
        }
        let clips = self
            .clips
            .iter()
            .map(|c| {
                let mut c = c.clone();
                for v in &mut c.views {
                    v.captions.retain(|k, _| ids.contains(k));
                }
                c
            })
            .collect();
        Corpus::new(ids.to_vec(), self.f_dim, clips).map(|c| c.with_split_tag(self.split_tag))
    }

    fn validate(&self) -> Result<()> {
        if self.captioner_ids.is_empty() {
            return Err(Error::InvalidArgument("captioner_ids is empty".into()));
        }
        if self.f_dim == 0 {
            return Err(Error::InvalidArgument("f_dim must be positive".into()));
        }
        let mut seen_clips = HashSet::new();
        let n_views = self.n_views();
        for clip in &self.clips {
            if !seen_clips.insert(clip.clip_id.as_str()) {
                return Err(Error::invalid(&clip.clip_id, "duplicate clip_id"));
            }
            validate_clip(clip, &self.captioner_ids, self.f_dim)?;
            if Some(clip.n_views()) != n_views {
                return Err(Error::Dimension(format!(
                    "clip {}: {} views, corpus has {}",
                    clip.clip_id,
                    clip.n_views(),
                    n_views.unwrap_or(0)
                )));
            }
        }
        Ok(())
    }
}

fn validate_clip(clip: &Clip, captioner_ids: &[String], f_dim: usize) -> Result<()> {
    let id = clip.clip_id.as_str();
    if clip.views.len() < 2 {
        return Err(Error::invalid(id, format!("views: need at least 2, got {}", clip.views.len())));
    }
    match clip.views.iter().filter(|v| v.is_ego).count() {
        0 => return Err(Error::invalid(id, "no ego view")),
        1 => {}
        _ => return Err(Error::invalid(id, "multiple ego views")),
    }
    let mut seen = HashSet::new();
    for view in &clip.views {
        if !seen.insert(view.view_id.as_str()) {
            return Err(Error::invalid(id, format!("view_id {}: duplicate", view.view_id)));
        }
        if view.feature.len() != f_dim {
            return Err(Error::Dimension(format!(
                "clip {id}: view {}: feature length {}, expected {f_dim}",
                view.view_id,
                view.feature.len()
            )));
        }
        if view.feature.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(id, format!("view {}: feature: non-finite value", view.view_id)));
        }
        if let Err(msg) = view.extrinsics.check_rotation() {
            return Err(Error::invalid(id, format!("view {}: extrinsics.R: {msg}", view.view_id)));
        }
        if view.extrinsics.translation.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(id, format!("view {}: extrinsics.t: non-finite value", view.view_id)));
        }
        for cid in captioner_ids {
            if !view.captions.contains_key(cid) {
                return Err(Error::invalid(
                    id,
                    format!("view {}: captions: missing captioner {cid}", view.view_id),
                ));
            }
        }
    }
    Ok(())
}

// ---- manifest wire format ----

#[derive(Debug, Serialize, Deserialize)]
struct ManifestHeader {
    captioner_ids: Vec<String>,
    f_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitTag>,
    #[serde(default, rename = "_provenance", skip_serializing_if = "Option::is_none")]
    provenance: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawExtrinsics {
    #[serde(rename = "R")]
    r: Vec<f64>,
    t: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawView {
    view_id: String,
    is_ego: bool,
    feature: Vec<f64>,
    extrinsics: RawExtrinsics,
    captions: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawClip {
    clip_id: String,
    narration: String,
    views: Vec<RawView>,
}

impl RawClip {
    fn into_clip(self) -> Result<Clip> {
        let clip_id = self.clip_id;
        let views = self
            .views
            .into_iter()
            .map(|v| {
                if v.extrinsics.r.len() != 9 || v.extrinsics.t.len() != 3 {
                    return Err(Error::Dimension(format!(
                        "clip {clip_id}: view {}: extrinsics need 9 rotation and 3 translation values",
                        v.view_id
                    )));
                }
                Ok(ViewRecord {
                    view_id: v.view_id,
                    is_ego: v.is_ego,
                    feature: v.feature,
                    extrinsics: CameraExtrinsics::new(
                        Matrix3::from_row_slice(&v.extrinsics.r),
                        Vector3::from_column_slice(&v.extrinsics.t),
                    ),
                    captions: v.captions,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Clip {
            clip_id,
            views,
            narration: self.narration,
        })
    }

    fn from_clip(clip: &Clip) -> Self {
        RawClip {
            clip_id: clip.clip_id.clone(),
            narration: clip.narration.clone(),
            views: clip
                .views
                .iter()
                .map(|v| RawView {
                    view_id: v.view_id.clone(),
                    is_ego: v.is_ego,
                    feature: v.feature.clone(),
                    extrinsics: RawExtrinsics {
                        r: v.extrinsics.rotation.transpose().iter().copied().collect(),
                        t: v.extrinsics.translation.iter().copied().collect(),
                    },
                    captions: v.captions.clone(),
                })
                .collect(),
        }
    }
}

/// Parse a manifest from any reader. `origin` is only used in error messages.
pub fn read_manifest(reader: impl BufRead, origin: &Path) -> Result<Corpus> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };
    let mut header: Option<ManifestHeader> = None;
    let mut clips = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match header {
            None => {
                header = Some(
                    serde_json::from_str(&line).map_err(|e| parse_err(lineno, format!("header: {e}")))?,
                );
            }
            Some(_) => {
                let raw: RawClip = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
                clips.push(raw.into_clip()?);
            }
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing header line".into()))?;
    Ok(Corpus::new(header.captioner_ids, header.f_dim, clips)?.with_split_tag(header.split))
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_manifest(BufReader::new(file), path)
}

/// Serialize a corpus as a manifest. `provenance`, when given, is stored in
/// the header under `_provenance` and ignored on load.
pub fn write_manifest(
    corpus: &Corpus,
    mut out: impl Write,
    provenance: Option<&serde_json::Value>,
) -> std::io::Result<()> {
    let header = ManifestHeader {
        captioner_ids: corpus.captioner_ids.clone(),
        f_dim: corpus.f_dim,
        split: corpus.split_tag,
        provenance: provenance.cloned(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for clip in &corpus.clips {
        serde_json::to_writer(&mut out, &RawClip::from_clip(clip))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_manifest(
    corpus: &Corpus,
    path: impl AsRef<Path>,
    provenance: Option<&serde_json::Value>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_manifest(corpus, &mut w, provenance).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Deterministically partition a corpus into train/val/test.
///
/// Val and test sizes are `floor(n * fraction)`; the remainder goes to train.
pub fn split_corpus(
    corpus: &Corpus,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Corpus, Corpus, Corpus)> {
    let (ftr, fva, fte) = fractions;
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty corpus".into()));
    }
    if [ftr, fva, fte].iter().any(|f| !(f.is_finite() && *f > 0.0)) || (ftr + fva + fte - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be positive and sum to 1, got ({ftr}, {fva}, {fte})"
        )));
    }
    let n = corpus.len();
    // The small epsilon keeps e.g. 0.29 * 100 from flooring to 28.
    let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
    let n_val = floor(fva);
    let n_test = floor(fte);
    let n_train = n - n_val - n_test;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let take = |idx: &[usize], tag: SplitTag| Corpus {
        clips: idx.iter().map(|&i| corpus.clips[i].clone()).collect(),
        captioner_ids: corpus.captioner_ids.clone(),
        f_dim: corpus.f_dim,
        split_tag: Some(tag),
    };
    let (train_idx, rest) = order.split_at(n_train);
    let (val_idx, test_idx) = rest.split_at(n_val);
    Ok((
        take(train_idx, SplitTag::Train),
        take(val_idx, SplitTag::Val),
        take(test_idx, SplitTag::Test),
    ))
}
