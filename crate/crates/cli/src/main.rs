//! `bestview`: command-line pipeline for best-view selection.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bestview", version, about = "Weakly-supervised best-view selection for multi-view video")]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true, env = "BESTVIEW_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for per-clip work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a manifest (and optionally label files) and print a summary.
    Validate(ValidateArgs),
    /// Split a manifest into train/val/test manifests.
    Split(SplitArgs),
    /// Score captions against narrations and write best-view pseudo-labels.
    Pseudolabel(PseudolabelArgs),
    /// Write discretized relative-pose labels for every view pair.
    Poselabels(PoselabelsArgs),
    /// Train the view selector.
    Train(TrainArgs),
    /// Pick a view per clip with a trained selector.
    Select(SelectArgs),
    /// Score selectors and baselines with caption metrics.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus with a planted best view per clip.
    Synth(SynthArgs),
    /// Run the pairwise human-study service.
    Serve(ServeArgs),
    /// Tally a human-study judgment log.
    Tally(TallyArgs),
    /// Render saved evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub poses: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    pub manifest: PathBuf,
    /// Train,val,test fractions.
    #[arg(long, default_value = "0.8,0.1,0.1")]
    pub fractions: String,
    #[arg(long, short = 'o')]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PseudolabelArgs {
    pub manifest: PathBuf,
    /// cider or meteor.
    #[arg(long)]
    pub metric: Option<String>,
    /// union, intersection_fallback or majority.
    #[arg(long)]
    pub policy: Option<String>,
    /// Comma-separated captioner ids to use (default: all).
    #[arg(long, value_delimiter = ',')]
    pub captioners: Option<Vec<String>>,
    /// Score raw tokens instead of stems.
    #[arg(long)]
    pub no_stem: bool,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PoselabelsArgs {
    pub manifest: PathBuf,
    /// Bin size in degrees.
    #[arg(long)]
    pub beta: Option<u32>,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Pose-label file; computed from the manifests when absent.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<u32>,
    /// Pose-loss weight.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub h_dim: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Plain cross-entropy on one randomly drawn pseudo-label per clip.
    #[arg(long)]
    pub single_label: bool,
    /// Per-epoch loss curve as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "ours")]
    pub name: String,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub manifest: PathBuf,
    /// Captioner whose captions are scored (default: the first in the manifest).
    #[arg(long)]
    pub eval_captioner: Option<String>,
    /// Trained selector to evaluate, as NAME=PATH or PATH.
    #[arg(long)]
    pub checkpoint: Vec<String>,
    /// Saved selection files.
    #[arg(long)]
    pub selection: Vec<PathBuf>,
    /// Comma-separated baselines.
    #[arg(long, value_delimiter = ',', default_value = "ego_only,random,random_exo,longest_caption")]
    pub baselines: Vec<String>,
    /// Manifests whose narrations build the CIDEr idf table (default: the evaluated manifest).
    #[arg(long)]
    pub idf_from: Vec<PathBuf>,
    /// Planted-view file from `synth`; adds top-1 accuracy lines.
    #[arg(long)]
    pub planted: Option<PathBuf>,
    /// Pairs A,B to test for significance.
    #[arg(long)]
    pub compare: Vec<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Write the rendered table here.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
    /// Save full reports (with per-clip scores) for `report`.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub clips: Option<usize>,
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub f_dim: Option<usize>,
    #[arg(long)]
    pub captioners: Option<usize>,
    #[arg(long)]
    pub vocab: Option<usize>,
    #[arg(long)]
    pub narration_len: Option<usize>,
    /// Corruption rate.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub captioner_noise: Option<f64>,
    #[arg(long)]
    pub max_other_quality: Option<f64>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Append up to this many irrelevant tokens per view, independent of quality.
    #[arg(long)]
    pub verbose_extra: Option<usize>,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
    /// Where to write the planted best view per clip.
    #[arg(long)]
    pub planted: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Session spec JSON files.
    #[arg(long, required = true)]
    pub session: Vec<PathBuf>,
    /// Directory for session copies and judgment logs.
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Directory served under /media.
    #[arg(long)]
    pub media_dir: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Args)]
pub struct TallyArgs {
    /// Judgment log (JSON lines).
    pub log: PathBuf,
    /// Side whose wins are counted: a or b.
    #[arg(long, default_value = "a")]
    pub policy: String,
    /// judgment or pair.
    #[arg(long, default_value = "judgment")]
    pub mode: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Files written by `evaluate --save`.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value = "text")]
    pub format: String,
    #[arg(long)]
    pub compare: Vec<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<bestview_core::Error>() {
        Some(bestview_core::Error::InvalidArgument(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
