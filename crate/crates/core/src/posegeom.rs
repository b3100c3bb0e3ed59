//! Ground-truth relative camera poses and their angle-bin labels.
//!
//! Conventions:
//! - extrinsics are world-to-camera, `x_cam = R x_world + t`, centers `c = -R^T t`;
//! - the relative rotation maps camera i's frame to camera j's, `R_j R_i^T`;
//! - the displacement direction is `c_j - c_i` expressed in camera i's frame;
//! - rotations are decomposed as intrinsic Z-Y-X Euler angles
//!   `R = Rz(yaw) Ry(pitch) Rx(roll)`; at `|pitch| = 90` roll is set to 0;
//! - directions become azimuth `atan2(y, x)` and elevation `asin(z)`.
//!
//! Five classification heads: yaw, pitch, roll, azimuth and elevation. The
//! azimuth and elevation heads carry one extra class used when both camera
//! centers coincide.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::corpus::{check_rotation, CameraExtrinsics, Clip};
use crate::error::{Error, Result};

pub const DEFAULT_BIN_DEG: u32 = 30;

/// Camera centers closer than this are treated as coincident.
pub const SAME_CENTER_EPS: f64 = 1e-9;

/// Angles are rounded to this grid (degrees) before binning so that values
/// a few ulps either side of a bin edge land in the same bin.
const ANGLE_SNAP_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Unit(Vector3<f64>),
    SameCenter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePose {
    pub rotation_rel: Matrix3<f64>,
    pub direction: Direction,
}

pub fn relative_pose(ext_i: &CameraExtrinsics, ext_j: &CameraExtrinsics) -> Result<RelativePose> {
    for (name, e) in [("i", ext_i), ("j", ext_j)] {
        check_rotation(&e.rotation).map_err(|m| Error::InvalidArgument(format!("camera {name}: {m}")))?;
    }
    let rotation_rel = ext_j.rotation * ext_i.rotation.transpose();
    let disp = ext_j.center() - ext_i.center();
    let direction = if disp.norm() < SAME_CENTER_EPS {
        Direction::SameCenter
    } else {
        Direction::Unit((ext_i.rotation * disp).normalize())
    };
    Ok(RelativePose {
        rotation_rel,
        direction,
    })
}

/// Euler angles in degrees: yaw and roll in `[-180, 180)`, pitch in `[-90, 90]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyx {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

fn wrap_half_open(deg: f64) -> f64 {
    if deg >= 180.0 {
        deg - 360.0
    } else if deg < -180.0 {
        deg + 360.0
    } else {
        deg
    }
}

pub fn euler_zyx(r: &Matrix3<f64>) -> EulerZyx {
    let s = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = s.asin();
    let (yaw, roll) = if s.abs() >= 1.0 - 1e-12 {
        // Gimbal lock: only yaw -/+ roll is observable; put it all in yaw.
        ((-r[(0, 1)]).atan2(r[(1, 1)]), 0.0)
    } else {
        (r[(1, 0)].atan2(r[(0, 0)]), r[(2, 1)].atan2(r[(2, 2)]))
    };
    EulerZyx {
        yaw: wrap_half_open(yaw.to_degrees()),
        pitch: pitch.to_degrees(),
        roll: wrap_half_open(roll.to_degrees()),
    }
}

/// Rotation matrix for intrinsic Z-Y-X angles in degrees.
pub fn rotation_from_euler(yaw: f64, pitch: f64, roll: f64) -> Matrix3<f64> {
    let (sy, cy) = yaw.to_radians().sin_cos();
    let (sp, cp) = pitch.to_radians().sin_cos();
    let (sr, cr) = roll.to_radians().sin_cos();
    let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
    let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
    rz * ry * rx
}

/// Azimuth in `[-180, 180)` and elevation in `[-90, 90]`, degrees.
pub fn azimuth_elevation(d: &Vector3<f64>) -> (f64, f64) {
    let az = wrap_half_open(d.y.atan2(d.x).to_degrees());
    let el = d.z.clamp(-1.0, 1.0).asin().to_degrees();
    (az, el)
}

/// The two angle ranges a head can cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadRange {
    /// `[-180, 180)`
    Full,
    /// `[-90, 90]`
    Half,
}

impl HeadRange {
    fn offset(self) -> f64 {
        match self {
            HeadRange::Full => 180.0,
            HeadRange::Half => 90.0,
        }
    }

    pub fn n_bins(self, bin_deg: u32) -> usize {
        match self {
            HeadRange::Full => (360 / bin_deg) as usize,
            HeadRange::Half => (180 / bin_deg) as usize,
        }
    }
}

pub fn bin_of(angle_deg: f64, range: HeadRange, bin_deg: u32) -> usize {
    let snapped = (angle_deg / ANGLE_SNAP_DEG).round() * ANGLE_SNAP_DEG;
    let raw = ((snapped + range.offset()) / bin_deg as f64).floor();
    let last = range.n_bins(bin_deg) - 1;
    (raw.max(0.0) as usize).min(last)
}

pub fn bin_center(bin: usize, range: HeadRange, bin_deg: u32) -> f64 {
    (bin as f64 + 0.5) * bin_deg as f64 - range.offset()
}

/// Class layout of the five pose heads for a given bin size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub bin_deg: u32,
}

pub const N_HEADS: usize = 5;

impl HeadLayout {
    pub fn new(bin_deg: u32) -> Result<Self> {
        if bin_deg == 0 || 360 % bin_deg != 0 || 180 % bin_deg != 0 {
            return Err(Error::InvalidArgument(format!(
                "bin size {bin_deg} must divide both 360 and 180"
            )));
        }
        Ok(Self { bin_deg })
    }

    /// Classes per head: yaw, pitch, roll, azimuth (+1), elevation (+1).
    pub fn head_sizes(&self) -> [usize; N_HEADS] {
        let full = HeadRange::Full.n_bins(self.bin_deg);
        let half = HeadRange::Half.n_bins(self.bin_deg);
        [full, half, full, full + 1, half + 1]
    }

    pub fn total_classes(&self) -> usize {
        self.head_sizes().iter().sum()
    }

    /// Start offset of each head's block in a flat logit vector.
    pub fn offsets(&self) -> [usize; N_HEADS] {
        let sizes = self.head_sizes();
        let mut out = [0; N_HEADS];
        for h in 1..N_HEADS {
            out[h] = out[h - 1] + sizes[h - 1];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoseLabel {
    pub yaw: usize,
    pub pitch: usize,
    pub roll: usize,
    #[serde(rename = "az")]
    pub azimuth: usize,
    #[serde(rename = "el")]
    pub elevation: usize,
    pub same_center: bool,
}

impl PoseLabel {
    /// Target class per head, in head order.
    pub fn classes(&self) -> [usize; N_HEADS] {
        [self.yaw, self.pitch, self.roll, self.azimuth, self.elevation]
    }
}

pub fn discretize_pose(pose: &RelativePose, bin_deg: u32) -> Result<PoseLabel> {
    let layout = HeadLayout::new(bin_deg)?;
    let e = euler_zyx(&pose.rotation_rel);
    let (azimuth, elevation, same_center) = match pose.direction {
        Direction::Unit(d) => {
            let (az, el) = azimuth_elevation(&d);
            (
                bin_of(az, HeadRange::Full, bin_deg),
                bin_of(el, HeadRange::Half, bin_deg),
                false,
            )
        }
        Direction::SameCenter => {
            let sizes = layout.head_sizes();
            (sizes[3] - 1, sizes[4] - 1, true)
        }
    };
    Ok(PoseLabel {
        yaw: bin_of(e.yaw, HeadRange::Full, bin_deg),
        pitch: bin_of(e.pitch, HeadRange::Half, bin_deg),
        roll: bin_of(e.roll, HeadRange::Full, bin_deg),
        azimuth,
        elevation,
        same_center,
    })
}

/// Labels for all `N^2` ordered view pairs of one clip, row-major `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLabelTable {
    pub clip_id: String,
    pub bin_deg: u32,
    n_views: usize,
    labels: Vec<PoseLabel>,
}

impl PoseLabelTable {
    pub fn from_labels(clip_id: impl Into<String>, bin_deg: u32, n_views: usize, labels: Vec<PoseLabel>) -> Result<Self> {
        let clip_id = clip_id.into();
        if labels.len() != n_views * n_views {
            return Err(Error::invalid(
                &clip_id,
                format!("pose table has {} pairs, expected {}", labels.len(), n_views * n_views),
            ));
        }
        Ok(Self {
            clip_id,
            bin_deg,
            n_views,
            labels,
        })
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&PoseLabel> {
        if i < self.n_views && j < self.n_views {
            self.labels.get(i * self.n_views + j)
        } else {
            None
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &PoseLabel)> {
        let n = self.n_views;
        self.labels.iter().enumerate().map(move |(k, l)| ((k / n, k % n), l))
    }
}

pub fn pose_label_table(clip: &Clip, bin_deg: u32) -> Result<PoseLabelTable> {
    HeadLayout::new(bin_deg)?;
    let n = clip.n_views();
    let mut labels = Vec::with_capacity(n * n);
    for vi in &clip.views {
        for vj in &clip.views {
            let pose = relative_pose(&vi.extrinsics, &vj.extrinsics)
                .map_err(|e| Error::invalid(&clip.clip_id, e.to_string()))?;
            labels.push(discretize_pose(&pose, bin_deg)?);
        }
    }
    PoseLabelTable::from_labels(clip.clip_id.clone(), bin_deg, n, labels)
}

// ---- pose-label file (JSON lines) ----

#[derive(Serialize, Deserialize)]
struct TableLine {
    clip_id: String,
    beta_deg: u32,
    pairs: BTreeMap<String, PoseLabel>,
}

pub fn write_tables<'a>(
    tables: impl IntoIterator<Item = &'a PoseLabelTable>,
    mut out: impl Write,
    provenance: Option<&serde_json::Value>,
) -> std::io::Result<()> {
    if let Some(p) = provenance {
        serde_json::to_writer(&mut out, &serde_json::json!({ "_provenance": p }))?;
        out.write_all(b"\n")?;
    }
    for t in tables {
        let line = TableLine {
            clip_id: t.clip_id.clone(),
            beta_deg: t.bin_deg,
            pairs: t.iter().map(|((i, j), l)| (format!("{i},{j}"), *l)).collect(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_tables(
    tables: &BTreeMap<String, PoseLabelTable>,
    path: impl AsRef<Path>,
    provenance: Option<&serde_json::Value>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tables(tables.values(), &mut w, provenance).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_tables(reader: impl BufRead, origin: &Path) -> Result<BTreeMap<String, PoseLabelTable>> {
    let mut out = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() || line.starts_with("{\"_provenance\"") {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let parsed: TableLine = serde_json::from_str(&line).map_err(|e| perr(e.to_string()))?;
        let n = (parsed.pairs.len() as f64).sqrt().round() as usize;
        let mut labels = vec![None; n * n];
        for (key, label) in parsed.pairs {
            let (i, j) = key
                .split_once(',')
                .and_then(|(a, b)| Some((a.trim().parse::<usize>().ok()?, b.trim().parse::<usize>().ok()?)))
                .ok_or_else(|| perr(format!("bad pair key {key:?}")))?;
            if i >= n || j >= n {
                return Err(perr(format!("pair {key} out of range for {n} views")));
            }
            labels[i * n + j] = Some(label);
        }
        let labels = labels
            .into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| perr("pose table is missing ordered pairs".into()))?;
        let table = PoseLabelTable::from_labels(parsed.clip_id, parsed.beta_deg, n, labels)?;
        out.insert(table.clip_id.clone(), table);
    }
    Ok(out)
}

pub fn load_tables(path: impl AsRef<Path>) -> Result<BTreeMap<String, PoseLabelTable>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tables(BufReader::new(file), path)
}
