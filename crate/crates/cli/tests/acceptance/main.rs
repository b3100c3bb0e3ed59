//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run with `cargo test -p bestview-cli --test acceptance`.

mod judging;
mod learning;
mod metrics;
mod oracles;
mod pipeline;
mod pose;
mod significance;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub type Check = Result<String, String>;

/// `ensure!(cond, "fmt", args)` returns `Err(message)` from a check.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: fn() -> Check,
}

fn main() {
    let criteria = [
        Criterion {
            name: "metric oracle parity",
            budget: Duration::from_secs(1),
            run: metrics::oracle_parity,
        },
        Criterion {
            name: "gradient correctness",
            budget: Duration::from_secs(30),
            run: learning::gradient_check,
        },
        Criterion {
            name: "view loss structure (min over labels, shift invariance)",
            budget: Duration::from_secs(10),
            run: learning::view_loss_structure,
        },
        Criterion {
            name: "pose loss structure (N = 2 flat-loop oracle)",
            budget: Duration::from_secs(10),
            run: learning::pose_loss_structure,
        },
        Criterion {
            name: "pose geometry",
            budget: Duration::from_secs(10),
            run: pose::geometry,
        },
        Criterion {
            name: "pseudo-label recovery",
            budget: Duration::from_secs(60),
            run: pipeline::pseudo_label_recovery,
        },
        Criterion {
            name: "end-to-end learning",
            budget: Duration::from_secs(300),
            run: pipeline::end_to_end,
        },
        Criterion {
            name: "sampled-rank monotonicity",
            budget: Duration::from_secs(60),
            run: pipeline::sampled_rank_monotonicity,
        },
        Criterion {
            name: "ablation configs runnable",
            budget: Duration::from_secs(300),
            run: pipeline::ablations,
        },
        Criterion {
            name: "significance calibration",
            budget: Duration::from_secs(120),
            run: significance::calibration,
        },
        Criterion {
            name: "judging log replay",
            budget: Duration::from_secs(10),
            run: judging::log_replay,
        },
    ];

    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.budget => Err(format!("{detail}; took {elapsed:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  {} [{elapsed:.2?}]: {detail}", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {} [{elapsed:.2?}]: {why}", c.name);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
