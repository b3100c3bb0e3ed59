use std::collections::BTreeMap;

use bestview_core::corpus::{split_corpus, Corpus};
use bestview_core::evalharness::{
    accuracy, baseline_select, evaluate, model_select, permutation_test, BaselineKind, ReportMetric,
};
use bestview_core::posegeom::{pose_label_table, HeadLayout, PoseLabelTable, DEFAULT_BIN_DEG};
use bestview_core::pseudolabel::{label_corpus, LabelConfig};
use bestview_core::selector::{build_samples, train, TrainConfig};
use bestview_core::synthgen::{generate, SynthConfig};
use bestview_core::textmetrics::{CaptionScorer, Metric, TermLexicon};

fn tables(corpus: &Corpus) -> BTreeMap<String, PoseLabelTable> {
    corpus
        .clips()
        .iter()
        .map(|c| (c.clip_id.clone(), pose_label_table(c, DEFAULT_BIN_DEG).unwrap()))
        .collect()
}

#[test]
fn pseudo_labels_recover_planted_view() {
    let out = generate(&SynthConfig {
        n_clips: 200,
        corruption_rate: 0.1,
        seed: 11,
        ..SynthConfig::default()
    })
    .unwrap();
    let labels = label_corpus(&out.corpus, &LabelConfig::default()).unwrap().labels;
    let hit = out.planted.iter().filter(|(id, v)| labels[*id].labels.contains(v)).count();
    assert!(hit as f64 / out.planted.len() as f64 >= 0.95, "recovered {hit}/200");
}

#[test]
fn zero_corruption_labels_every_view() {
    let out = generate(&SynthConfig {
        n_clips: 30,
        corruption_rate: 0.0,
        seed: 2,
        ..SynthConfig::default()
    })
    .unwrap();
    let labels = label_corpus(&out.corpus, &LabelConfig::default()).unwrap().labels;
    assert!(labels.values().all(|l| l.labels.len() == 5));
}

#[test]
fn trained_selector_beats_random() {
    let out = generate(&SynthConfig {
        n_clips: 300,
        corruption_rate: 0.2,
        feature_snr: 6.0,
        seed: 5,
        ..SynthConfig::default()
    })
    .unwrap();
    let corpus = out.corpus;
    let labels = label_corpus(&corpus, &LabelConfig::default()).unwrap().labels;
    let tables = tables(&corpus);
    let (tr, va, te) = split_corpus(&corpus, (200.0 / 300.0, 50.0 / 300.0, 50.0 / 300.0), 5).unwrap();
    let cfg = TrainConfig::default();
    let (params, _) = train(
        &build_samples(&tr, &labels, &tables).unwrap(),
        &build_samples(&va, &labels, &tables).unwrap(),
        HeadLayout::new(DEFAULT_BIN_DEG).unwrap(),
        &cfg,
    )
    .unwrap();

    let sel = model_select(&params, &te, "ours").unwrap();
    let acc = accuracy(&sel, &out.planted);
    assert!(acc >= 0.9, "accuracy {acc}");

    let scorer = CaptionScorer::new(Metric::Cider, true, corpus.clips().iter().map(|c| c.narration.as_str())).unwrap();
    let lex = TermLexicon::default();
    let ours = evaluate(&sel, &te, "cap0", &scorer, &lex).unwrap();
    let random = evaluate(
        &baseline_select(&te, BaselineKind::Random, 0, "cap0", &scorer).unwrap(),
        &te,
        "cap0",
        &scorer,
        &lex,
    )
    .unwrap();
    assert!(ours.cider > random.cider);
    let p = permutation_test(&ours, &random, ReportMetric::Cider, 2000, 0).unwrap();
    assert!(p <= 0.05, "p = {p}");
}

