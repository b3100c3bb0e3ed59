//! Caption-based evaluation of view-selection policies.
//!
//! A [`Selection`] picks one view per clip. [`evaluate`] scores the chosen
//! view's caption (from a designated evaluation captioner) against the
//! clip narration with CIDEr-D, METEOR and the three term IoUs.
//!
//! Reporting convention: CIDEr is the mean native `[0, 10]` score times 10,
//! so identical captions report 100.0. METEOR and the IoUs are means times
//! 100. Per-clip scores are kept in native units for significance tests.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Clip, Corpus};
use crate::error::{Error, Result};
use crate::pseudolabel::score_and_rank;
use crate::selector::{select, SelectorParams};
use crate::textmetrics::{meteor_lite, term_ious, tokenize, CaptionScorer, TermLexicon};

pub const CONVENTION: &str = "CIDEr = mean CIDEr-D x 10; METEOR, V-IoU, N-IoU, NC-IoU = mean x 100";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    EgoOnly,
    Random,
    RandomExo,
    LongestCaption,
    OracleBest,
    OracleSecond,
    OracleWorst,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        Self::EgoOnly,
        Self::Random,
        Self::RandomExo,
        Self::LongestCaption,
        Self::OracleBest,
        Self::OracleSecond,
        Self::OracleWorst,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::EgoOnly => "ego_only",
            Self::Random => "random",
            Self::RandomExo => "random_exo",
            Self::LongestCaption => "longest_caption",
            Self::OracleBest => "oracle_best",
            Self::OracleSecond => "oracle_second",
            Self::OracleWorst => "oracle_worst",
        }
    }
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown baseline {s:?}")))
    }
}

/// One chosen view per clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub policy_name: String,
    pub choices: BTreeMap<String, usize>,
}

impl Selection {
    pub fn new(policy_name: impl Into<String>) -> Self {
        Self {
            policy_name: policy_name.into(),
            choices: BTreeMap::new(),
        }
    }

    fn check_covers(&self, corpus: &Corpus) -> Result<()> {
        if self.choices.len() != corpus.len() {
            return Err(Error::InvalidArgument(format!(
                "selection {:?} covers {} clips, corpus has {}",
                self.policy_name,
                self.choices.len(),
                corpus.len()
            )));
        }
        for (id, &v) in &self.choices {
            let clip = corpus
                .clip(id)
                .ok_or_else(|| Error::InvalidArgument(format!("selection names unknown clip {id:?}")))?;
            if v >= clip.n_views() {
                return Err(Error::invalid(id, format!("selected view {v} out of range")));
            }
        }
        Ok(())
    }
}

/// Top-1 accuracy of a selection against a reference view per clip.
pub fn accuracy(selection: &Selection, reference: &BTreeMap<String, usize>) -> f64 {
    if selection.choices.is_empty() {
        return 0.0;
    }
    let hits = selection
        .choices
        .iter()
        .filter(|(id, v)| reference.get(*id) == Some(v))
        .count();
    hits as f64 / selection.choices.len() as f64
}

/// Seed stream per clip id, so choices do not depend on clip order.
fn clip_rng(seed: u64, clip_id: &str) -> ChaCha8Rng {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in clip_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

fn baseline_view(
    clip: &Clip,
    kind: BaselineKind,
    seed: u64,
    captioner: &str,
    scorer: &CaptionScorer,
) -> Result<usize> {
    let n = clip.n_views();
    Ok(match kind {
        BaselineKind::EgoOnly => {
            if !clip.views.iter().any(|v| v.is_ego) {
                return Err(Error::invalid(&clip.clip_id, "no ego view"));
            }
            clip.ego_index()
        }
        BaselineKind::Random => clip_rng(seed, &clip.clip_id).gen_range(0..n),
        BaselineKind::RandomExo => {
            let exo: Vec<usize> = (0..n).filter(|&v| !clip.views[v].is_ego).collect();
            if exo.is_empty() {
                return Err(Error::invalid(&clip.clip_id, "no exo views"));
            }
            exo[clip_rng(seed, &clip.clip_id).gen_range(0..exo.len())]
        }
        BaselineKind::LongestCaption => {
            let mut best = (0, 0);
            for v in 0..n {
                let len = tokenize(clip.caption(v, captioner)?).len();
                if len > best.1 || v == 0 {
                    best = (v, len);
                }
            }
            best.0
        }
        BaselineKind::OracleBest | BaselineKind::OracleSecond | BaselineKind::OracleWorst => {
            let order = score_and_rank(clip, captioner, scorer)?.order();
            match kind {
                BaselineKind::OracleBest => order[0],
                BaselineKind::OracleSecond => order[1.min(n - 1)],
                _ => order[n - 1],
            }
        }
    })
}

/// Selection made by a baseline. Oracles rank views with `scorer` and the
/// evaluation captioner.
pub fn baseline_select(
    corpus: &Corpus,
    kind: BaselineKind,
    seed: u64,
    eval_captioner: &str,
    scorer: &CaptionScorer,
) -> Result<Selection> {
    let choices = corpus
        .clips()
        .par_iter()
        .map(|c| Ok((c.clip_id.clone(), baseline_view(c, kind, seed, eval_captioner, scorer)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Selection {
        policy_name: kind.name().to_string(),
        choices,
    })
}

/// Selection made by a trained selector.
pub fn model_select(params: &SelectorParams, corpus: &Corpus, policy_name: &str) -> Result<Selection> {
    let choices = corpus
        .clips()
        .par_iter()
        .map(|c| Ok((c.clip_id.clone(), select(params, c)?.0)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(Selection {
        policy_name: policy_name.to_string(),
        choices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportMetric {
    Cider,
    Meteor,
    VIou,
    NIou,
    NcIou,
}

impl ReportMetric {
    pub const ALL: [ReportMetric; 5] = [Self::Cider, Self::Meteor, Self::VIou, Self::NIou, Self::NcIou];

    pub fn label(self) -> &'static str {
        match self {
            Self::Cider => "CIDEr",
            Self::Meteor => "METEOR",
            Self::VIou => "V-IoU",
            Self::NIou => "N-IoU",
            Self::NcIou => "NC-IoU",
        }
    }

    /// Factor from native per-clip units to reported percent.
    pub fn scale(self) -> f64 {
        match self {
            Self::Cider => 10.0,
            _ => 100.0,
        }
    }
}

impl std::str::FromStr for ReportMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|m| m.label().to_ascii_lowercase().replace('-', "") == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric {s:?}")))
    }
}

/// Per-clip scores in native units, aligned with `clip_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClipScores {
    pub clip_ids: Vec<String>,
    pub cider: Vec<f64>,
    pub meteor: Vec<f64>,
    pub v_iou: Vec<f64>,
    pub n_iou: Vec<f64>,
    pub nc_iou: Vec<f64>,
}

impl PerClipScores {
    pub fn get(&self, metric: ReportMetric) -> &[f64] {
        match metric {
            ReportMetric::Cider => &self.cider,
            ReportMetric::Meteor => &self.meteor,
            ReportMetric::VIou => &self.v_iou,
            ReportMetric::NIou => &self.n_iou,
            ReportMetric::NcIou => &self.nc_iou,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub policy_name: String,
    pub cider: f64,
    pub meteor: f64,
    pub v_iou: f64,
    pub n_iou: f64,
    pub nc_iou: f64,
    pub per_clip: PerClipScores,
}

impl MetricReport {
    pub fn get(&self, metric: ReportMetric) -> f64 {
        match metric {
            ReportMetric::Cider => self.cider,
            ReportMetric::Meteor => self.meteor,
            ReportMetric::VIou => self.v_iou,
            ReportMetric::NIou => self.n_iou,
            ReportMetric::NcIou => self.nc_iou,
        }
    }

    pub fn n_clips(&self) -> usize {
        self.per_clip.clip_ids.len()
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Score a selection. CIDEr uses `scorer`'s idf table and stemming.
pub fn evaluate(
    selection: &Selection,
    corpus: &Corpus,
    eval_captioner: &str,
    scorer: &CaptionScorer,
    lexicon: &TermLexicon,
) -> Result<MetricReport> {
    selection.check_covers(corpus)?;
    let rows = selection
        .choices
        .par_iter()
        .map(|(id, &v)| {
            let clip = corpus.clip(id).expect("checked above");
            let caption = clip.caption(v, eval_captioner)?;
            let (cand, refr) = (tokenize(caption), tokenize(&clip.narration));
            let ious = term_ious(&cand, &refr, lexicon);
            Ok([scorer.cider(caption, &clip.narration), meteor_lite(&cand, &refr), ious[0], ious[1], ious[2]])
        })
        .collect::<Result<Vec<[f64; 5]>>>()?;
    let col = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let per_clip = PerClipScores {
        clip_ids: selection.choices.keys().cloned().collect(),
        cider: col(0),
        meteor: col(1),
        v_iou: col(2),
        n_iou: col(3),
        nc_iou: col(4),
    };
    Ok(MetricReport {
        policy_name: selection.policy_name.clone(),
        cider: mean(&per_clip.cider) * ReportMetric::Cider.scale(),
        meteor: mean(&per_clip.meteor) * 100.0,
        v_iou: mean(&per_clip.v_iou) * 100.0,
        n_iou: mean(&per_clip.n_iou) * 100.0,
        nc_iou: mean(&per_clip.nc_iou) * 100.0,
        per_clip,
    })
}

/// Paired two-sided sign-flip permutation test on per-clip differences.
///
/// Returns `(1 + #{|permuted mean| >= |observed mean|}) / (1 + iterations)`.
/// Iteration `t` draws its signs from stream `t` of a generator seeded with
/// `seed`, so the result does not depend on thread scheduling.
pub fn permutation_test(
    a: &MetricReport,
    b: &MetricReport,
    metric: ReportMetric,
    iterations: usize,
    seed: u64,
) -> Result<f64> {
    if a.per_clip.clip_ids != b.per_clip.clip_ids {
        return Err(Error::InvalidArgument(format!(
            "reports {:?} and {:?} cover different clips",
            a.policy_name, b.policy_name
        )));
    }
    let diffs: Vec<f64> = a
        .per_clip
        .get(metric)
        .iter()
        .zip(b.per_clip.get(metric))
        .map(|(x, y)| x - y)
        .collect();
    sign_flip_p_value(&diffs, iterations, seed)
}

/// Sign-flip p-value for paired differences.
pub fn sign_flip_p_value(diffs: &[f64], iterations: usize, seed: u64) -> Result<f64> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("permutation test needs at least one iteration".into()));
    }
    let observed = diffs.iter().sum::<f64>().abs();
    // Sums equal up to rounding count as ties.
    let tol = 1e-12 * diffs.iter().map(|d| d.abs()).sum::<f64>();
    let hits: usize = (0..iterations as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t);
            let mut s = 0.0;
            let mut bits = 0u64;
            for (k, d) in diffs.iter().enumerate() {
                if k % 64 == 0 {
                    bits = rng.gen();
                }
                s += if bits & 1 == 1 { *d } else { -*d };
                bits >>= 1;
            }
            usize::from(s.abs() >= observed - tol)
        })
        .sum();
    Ok((1 + hits) as f64 / (1 + iterations) as f64)
}

/// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::InvalidArgument(format!("unknown report format {s:?}"))),
        }
    }
}

fn round1(x: f64) -> f64 {
    format!("{x:.1}").parse().expect("formatted float")
}

/// Render a table with one row per report and values to one decimal.
pub fn render_report(reports: &[MetricReport], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to render".into()));
    }
    let mut out = String::new();
    match format {
        ReportFormat::Text => {
            let width = reports.iter().map(|r| r.policy_name.len()).max().unwrap_or(0).max(6);
            writeln!(out, "# {CONVENTION}").unwrap();
            write!(out, "{:<width$}", "policy").unwrap();
            for m in ReportMetric::ALL {
                write!(out, " {:>7}", m.label()).unwrap();
            }
            out.push('\n');
            for r in reports {
                write!(out, "{:<width$}", r.policy_name).unwrap();
                for m in ReportMetric::ALL {
                    write!(out, " {:>7.1}", r.get(m)).unwrap();
                }
                out.push('\n');
            }
        }
        ReportFormat::Csv => {
            out.push_str("policy");
            for m in ReportMetric::ALL {
                write!(out, ",{}", m.label()).unwrap();
            }
            out.push('\n');
            for r in reports {
                out.push_str(&r.policy_name.replace(',', ";"));
                for m in ReportMetric::ALL {
                    write!(out, ",{:.1}", r.get(m)).unwrap();
                }
                out.push('\n');
            }
        }
        ReportFormat::Json => {
            let rows: Vec<serde_json::Value> = reports
                .iter()
                .map(|r| {
                    let mut row = serde_json::Map::new();
                    row.insert("policy".into(), r.policy_name.clone().into());
                    for m in ReportMetric::ALL {
                        row.insert(m.label().into(), round1(r.get(m)).into());
                    }
                    row.insert("n_clips".into(), r.n_clips().into());
                    serde_json::Value::Object(row)
                })
                .collect();
            out = serde_json::to_string_pretty(&serde_json::json!({
                "convention": CONVENTION,
                "reports": rows,
            }))?;
            out.push('\n');
        }
    }
    Ok(out)
}
