use bestview_core::evalharness::{ks_uniform, sign_flip_p_value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ensure, Check};

const TRIALS: u64 = 1000;
const ITERATIONS: usize = 1000;
const CLIPS: usize = 50;
const KS_MAX: f64 = 0.05;

pub fn calibration() -> Check {
    let ps = (0..TRIALS)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            let diffs: Vec<f64> = (0..CLIPS).map(|_| rng.gen_range(-1.0..1.0)).collect();
            sign_flip_p_value(&diffs, ITERATIONS, t).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let ks = ks_uniform(&ps);
    ensure!(ks < KS_MAX, "KS statistic {ks:.4} >= {KS_MAX}");
    let below = ps.iter().filter(|&&p| p <= 0.05).count();
    Ok(format!(
        "{TRIALS} null trials x {ITERATIONS} sign flips: KS {ks:.4}; {below} of {TRIALS} p-values <= 0.05"
    ))
}
