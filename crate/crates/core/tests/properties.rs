use std::collections::BTreeSet;

use bestview_core::pseudolabel::{aggregate_consensus, dense_ranks, AggregationPolicy, ViewScores};
use bestview_core::selector::loss_view;
use bestview_core::textmetrics::{build_idf, cider_d, meteor_lite, term_ious, tokenize, TermLexicon};
use proptest::prelude::*;

const WORDS: [&str; 12] = [
    "c", "cuts", "the", "onion", "board", "knife", "picks", "up", "red", "wheel", "spins", "on",
];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 1..10).prop_map(|w| w.join(" "))
}

proptest! {
    #[test]
    fn dense_ranks_follow_a_monotone_transform(scores in prop::collection::vec(-5.0f64..5.0, 1..8), a in 0.1f64..10.0, b in -3.0f64..3.0) {
        let moved: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let (r, m) = (dense_ranks(&scores), dense_ranks(&moved));
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] {
                    prop_assert!(r[i] < r[j]);
                    prop_assert!(m[i] <= m[j]);
                }
            }
        }
        prop_assert!(r.contains(&1));
    }

    #[test]
    fn union_contains_every_other_policy(k in 1usize..5, n in 2usize..6, seed in any::<u64>()) {
        let per: Vec<ViewScores> = (0..k)
            .map(|c| {
                let scores = (0..n).map(|v| ((seed >> ((c * n + v) % 60)) & 3) as f64).collect();
                ViewScores::from_scores(format!("cap{c}"), scores)
            })
            .collect();
        let union = aggregate_consensus(&per, AggregationPolicy::Union).unwrap();
        prop_assert!(!union.is_empty());
        for p in [AggregationPolicy::IntersectionFallback, AggregationPolicy::Majority] {
            let s = aggregate_consensus(&per, p).unwrap();
            prop_assert!(!s.is_empty());
            prop_assert!(s.is_subset(&union));
        }
    }

    #[test]
    fn metrics_stay_in_range(c in sentence(), r in sentence(), others in prop::collection::vec(sentence(), 1..5)) {
        let (ct, rt) = (tokenize(&c).stemmed(), tokenize(&r).stemmed());
        let mut docs: Vec<_> = others.iter().map(|s| tokenize(s).stemmed()).collect();
        docs.push(rt.clone());
        let idf = build_idf(&docs).unwrap();
        let cider = cider_d(&ct, &rt, &idf);
        prop_assert!((0.0..=10.0 + 1e-9).contains(&cider), "cider {}", cider);
        let m = meteor_lite(&tokenize(&c), &tokenize(&r));
        prop_assert!((0.0..=1.0).contains(&m), "meteor {}", m);
        for iou in term_ious(&tokenize(&c), &tokenize(&r), &TermLexicon::default()) {
            prop_assert!((0.0..=1.0).contains(&iou));
        }
    }

    #[test]
    fn view_loss_is_min_over_singletons(logits in prop::collection::vec(-10.0f64..10.0, 2..7), mask in 1u32..127) {
        let labels: BTreeSet<usize> = (0..logits.len()).filter(|i| mask >> i & 1 == 1).collect();
        prop_assume!(!labels.is_empty());
        let min = labels
            .iter()
            .map(|&b| loss_view(&logits, &BTreeSet::from([b])).unwrap())
            .fold(f64::INFINITY, f64::min);
        let l = loss_view(&logits, &labels).unwrap();
        prop_assert_eq!(l, min);
        prop_assert!(l >= 0.0);
    }
}
