use bestview_core::corpus::{CameraExtrinsics, Clip, ViewRecord};
use bestview_core::posegeom::{
    bin_center, bin_of, pose_label_table, relative_pose, rotation_from_euler, HeadLayout, HeadRange,
};
use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Check};

const ANTISYMMETRY_TOL: f64 = 1e-6;

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    rotation_from_euler(
        rng.gen_range(-180.0..180.0),
        rng.gen_range(-90.0..90.0),
        rng.gen_range(-180.0..180.0),
    )
}

fn random_camera(rng: &mut impl Rng) -> CameraExtrinsics {
    let c = Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
    CameraExtrinsics::from_center(random_rotation(rng), c)
}

fn clip(cams: Vec<CameraExtrinsics>) -> Clip {
    Clip {
        clip_id: "g".into(),
        views: cams
            .into_iter()
            .enumerate()
            .map(|(v, e)| ViewRecord {
                view_id: format!("v{v}"),
                is_ego: v == 0,
                feature: vec![0.0],
                extrinsics: e,
                captions: Default::default(),
            })
            .collect(),
        narration: "n".into(),
    }
}

pub fn geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);

    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let (a, b) = (random_camera(&mut rng), random_camera(&mut rng));
        let ij = relative_pose(&a, &b).map_err(|e| e.to_string())?;
        let ji = relative_pose(&b, &a).map_err(|e| e.to_string())?;
        let err = (ij.rotation_rel * ji.rotation_rel - Matrix3::identity()).abs().max();
        worst = worst.max(err);
        ensure!(err < ANTISYMMETRY_TOL, "R_ij R_ji deviates from I by {err}");
    }

    let mut tables = 0;
    for _ in 0..200 {
        let n = rng.gen_range(2..7);
        let mut cams: Vec<CameraExtrinsics> = (0..n).map(|_| random_camera(&mut rng)).collect();
        if rng.gen_bool(0.2) {
            // Two cameras at one center exercise the same-center class.
            let c = cams[0].center();
            cams[1] = CameraExtrinsics::from_center(random_rotation(&mut rng), c);
        }
        let g_rot = random_rotation(&mut rng);
        let g_t = Vector3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        // World points move by x' = G x + g, so x_cam = R G^T (x' - g) + t.
        let moved: Vec<CameraExtrinsics> = cams
            .iter()
            .map(|e| {
                let r = e.rotation * g_rot.transpose();
                CameraExtrinsics::new(r, e.translation - r * g_t)
            })
            .collect();
        let before = pose_label_table(&clip(cams), 30).map_err(|e| e.to_string())?;
        let after = pose_label_table(&clip(moved), 30).map_err(|e| e.to_string())?;
        for ((i, j), l) in before.iter() {
            let m = after.get(i, j).unwrap();
            ensure!(l == m, "pair ({i},{j}) changed under a global rigid transform: {l:?} vs {m:?}");
        }
        tables += 1;
    }

    let layout = HeadLayout::new(30).map_err(|e| e.to_string())?;
    let heads = [
        ("yaw", HeadRange::Full),
        ("pitch", HeadRange::Half),
        ("roll", HeadRange::Full),
        ("azimuth", HeadRange::Full),
        ("elevation", HeadRange::Half),
    ];
    let mut bins = 0;
    for (name, range) in heads {
        for b in 0..range.n_bins(30) {
            let back = bin_of(bin_center(b, range, 30), range, 30);
            ensure!(back == b, "{name} bin {b}: center maps back to bin {back}");
            bins += 1;
        }
    }
    ensure!(
        layout.head_sizes() == [12, 6, 12, 13, 7],
        "head sizes {:?}",
        layout.head_sizes()
    );
    Ok(format!(
        "500 pairs max |R_ij R_ji - I| {worst:.1e}; {tables} clips gauge-invariant; {bins} bin centers round-trip"
    ))
}
