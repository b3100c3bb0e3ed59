//! Optional TOML defaults file. Flags override anything set here.
//!
//! ```toml
//! seed = 7
//! jobs = 4
//! metric = "cider"
//! policy = "union"
//! beta = 30
//! eval_captioner = "cap0"
//!
//! [train]
//! w = 0.5
//! learning_rate = 0.1
//!
//! [synth]
//! n_clips = 300
//! ```

use std::path::Path;

use anyhow::Context;
use bestview_core::selector::TrainConfig;
use bestview_core::synthgen::SynthConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub metric: Option<String>,
    pub policy: Option<String>,
    pub stem: Option<bool>,
    pub captioners: Option<Vec<String>>,
    pub beta: Option<u32>,
    pub eval_captioner: Option<String>,
    pub iterations: Option<usize>,
    pub train: Option<TrainConfig>,
    pub synth: Option<SynthConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
