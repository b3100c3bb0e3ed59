use std::collections::BTreeMap;

use bestview_core::corpus::{split_corpus, Corpus};
use bestview_core::evalharness::{
    accuracy, baseline_select, evaluate, model_select, permutation_test, BaselineKind, MetricReport, ReportMetric,
    Selection,
};
use bestview_core::posegeom::{pose_label_table, HeadLayout, PoseLabelTable, DEFAULT_BIN_DEG};
use bestview_core::pseudolabel::{label_corpus, LabelConfig, PseudoLabelSet};
use bestview_core::selector::{build_samples, train, SelectorParams, TrainConfig};
use bestview_core::synthgen::{generate, SynthConfig, SynthOutput};
use bestview_core::textmetrics::{CaptionScorer, Metric, TermLexicon};

use crate::{ensure, Check};

const RECOVERY_MIN: f64 = 0.95;
const ACCURACY_MIN: f64 = 0.9;
const P_MAX: f64 = 0.05;
const PERM_ITERATIONS: usize = 10_000;
const EVAL_CAPTIONER: &str = "cap0";

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn synth(n_clips: usize, rho: f64, snr: f64, seed: u64) -> Result<SynthOutput, String> {
    generate(&SynthConfig {
        n_clips,
        corruption_rate: rho,
        feature_snr: snr,
        seed,
        ..SynthConfig::default()
    })
    .map_err(err)
}

fn tables(corpus: &Corpus) -> Result<BTreeMap<String, PoseLabelTable>, String> {
    corpus
        .clips()
        .iter()
        .map(|c| Ok((c.clip_id.clone(), pose_label_table(c, DEFAULT_BIN_DEG).map_err(err)?)))
        .collect()
}

fn scorer(corpus: &Corpus) -> Result<CaptionScorer, String> {
    CaptionScorer::new(Metric::Cider, true, corpus.clips().iter().map(|c| c.narration.as_str())).map_err(err)
}

struct Fixture {
    out: SynthOutput,
    train: Corpus,
    val: Corpus,
    test: Corpus,
    tables: BTreeMap<String, PoseLabelTable>,
}

fn fixture() -> Result<Fixture, String> {
    let out = synth(300, 0.2, 6.0, 5)?;
    let (train, val, test) =
        split_corpus(&out.corpus, (200.0 / 300.0, 50.0 / 300.0, 50.0 / 300.0), 5).map_err(err)?;
    let tables = tables(&out.corpus)?;
    Ok(Fixture { out, train, val, test, tables })
}

impl Fixture {
    fn fit(&self, labels: &BTreeMap<String, PseudoLabelSet>, cfg: &TrainConfig) -> Result<SelectorParams, String> {
        let (params, _) = train(
            &build_samples(&self.train, labels, &self.tables).map_err(err)?,
            &build_samples(&self.val, labels, &self.tables).map_err(err)?,
            HeadLayout::new(DEFAULT_BIN_DEG).map_err(err)?,
            cfg,
        )
        .map_err(err)?;
        Ok(params)
    }

    fn report(&self, sel: &Selection, scorer: &CaptionScorer) -> Result<MetricReport, String> {
        evaluate(sel, &self.test, EVAL_CAPTIONER, scorer, &TermLexicon::default()).map_err(err)
    }
}

pub fn pseudo_label_recovery() -> Check {
    let out = synth(500, 0.1, 4.0, 31)?;
    let labels = label_corpus(&out.corpus, &LabelConfig::default()).map_err(err)?.labels;
    let hit = out.planted.iter().filter(|(id, v)| labels[*id].labels.contains(v)).count();
    let rate = hit as f64 / out.planted.len() as f64;
    ensure!(rate >= RECOVERY_MIN, "planted view in union labels for {hit}/500 clips");
    let mean_size = labels.values().map(|l| l.labels.len()).sum::<usize>() as f64 / labels.len() as f64;

    let clean = synth(100, 0.0, 4.0, 32)?;
    let labels = label_corpus(&clean.corpus, &LabelConfig::default()).map_err(err)?.labels;
    ensure!(
        labels.values().all(|l| l.labels.len() == 5),
        "zero corruption should label every view"
    );
    Ok(format!(
        "rho 0.1: {hit}/500 = {:.1}% (mean label set size {mean_size:.2}); rho 0: all views labeled",
        rate * 100.0
    ))
}

pub fn end_to_end() -> Check {
    let fx = fixture()?;
    let labels = label_corpus(&fx.out.corpus, &LabelConfig::default()).map_err(err)?.labels;
    let params = fx.fit(&labels, &TrainConfig::default())?;
    let sel = model_select(&params, &fx.test, "ours").map_err(err)?;
    let acc = accuracy(&sel, &fx.out.planted);
    ensure!(acc >= ACCURACY_MIN, "test accuracy {acc:.3} < {ACCURACY_MIN}");

    let scorer = scorer(&fx.out.corpus)?;
    let ours = fx.report(&sel, &scorer)?;
    let random = fx.report(
        &baseline_select(&fx.test, BaselineKind::Random, 0, EVAL_CAPTIONER, &scorer).map_err(err)?,
        &scorer,
    )?;
    ensure!(
        ours.cider > random.cider,
        "CIDEr ours {:.1} <= random {:.1}",
        ours.cider,
        random.cider
    );
    let p = permutation_test(&ours, &random, ReportMetric::Cider, PERM_ITERATIONS, 0).map_err(err)?;
    ensure!(p <= P_MAX, "permutation p = {p}");
    Ok(format!(
        "test accuracy {acc:.3}; CIDEr ours {:.1} vs random {:.1}; p = {p:.4} ({PERM_ITERATIONS} iterations)",
        ours.cider,
        random.cider
    ))
}

pub fn sampled_rank_monotonicity() -> Check {
    let mut lines = Vec::new();
    for seed in [41u64, 42, 43] {
        let out = synth(100, 0.2, 4.0, seed)?;
        let scorer = scorer(&out.corpus)?;
        let lex = TermLexicon::default();
        let mut cider = BTreeMap::new();
        for kind in BaselineKind::ALL {
            let sel = baseline_select(&out.corpus, kind, seed, EVAL_CAPTIONER, &scorer).map_err(err)?;
            let r = evaluate(&sel, &out.corpus, EVAL_CAPTIONER, &scorer, &lex).map_err(err)?;
            cider.insert(kind.name(), r.cider);
        }
        let (best, second, worst) = (cider["oracle_best"], cider["oracle_second"], cider["oracle_worst"]);
        ensure!(
            best >= second && second >= worst && best > worst,
            "seed {seed}: best {best} second {second} worst {worst}"
        );
        for (name, v) in &cider {
            ensure!(best >= *v, "seed {seed}: {name} {v} beats oracle_best {best}");
        }
        lines.push(format!("{:.1}/{:.1}/{:.1}", best, second, worst));
    }
    Ok(format!("best/second/worst CIDEr over 3 seeds: {}", lines.join(", ")))
}

pub fn ablations() -> Check {
    let fx = fixture()?;
    let scorer = scorer(&fx.out.corpus)?;
    let full = label_corpus(&fx.out.corpus, &LabelConfig::default()).map_err(err)?.labels;
    let single_cap = label_corpus(
        &fx.out.corpus,
        &LabelConfig {
            captioners: Some(vec![EVAL_CAPTIONER.to_string()]),
            ..LabelConfig::default()
        },
    )
    .map_err(err)?
    .labels;

    let runs: [(&str, &BTreeMap<String, PseudoLabelSet>, TrainConfig); 4] = [
        ("full", &full, TrainConfig::default()),
        ("no_pose", &full, TrainConfig { w: 0.0, ..TrainConfig::default() }),
        ("single_label", &full, TrainConfig { single_label: true, ..TrainConfig::default() }),
        ("one_captioner", &single_cap, TrainConfig::default()),
    ];
    let mut parts = Vec::new();
    for (name, labels, cfg) in runs {
        let params = fx.fit(labels, &cfg)?;
        let sel = model_select(&params, &fx.test, name).map_err(err)?;
        let r = fx.report(&sel, &scorer)?;
        ensure!(r.n_clips() == fx.test.len(), "{name}: report covers {} clips", r.n_clips());
        for m in ReportMetric::ALL {
            let v = r.get(m);
            ensure!(v.is_finite() && v >= 0.0, "{name}: {} = {v}", m.label());
        }
        parts.push(format!("{name} {:.1}", r.cider));
    }
    Ok(format!("CIDEr on 50 test clips: {}", parts.join(", ")))
}
