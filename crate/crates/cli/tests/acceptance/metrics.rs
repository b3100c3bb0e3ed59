use bestview_core::textmetrics::{
    build_idf, cider_d, extract_terms, meteor_lite, term_ious, tokenize, TermKind, TermLexicon, TokenSeq,
};

use crate::{ensure, oracles, Check};

const TOL: f64 = 1e-9;

/// (candidate, reference)
const PAIRS: [(&str, &str); 20] = [
    ("c cuts the onion", "c cuts the onion"),
    ("c cuts the red onion on the board", "c slices the onion on the cutting board"),
    ("the wheel spins", "the wheel turns"),
    ("c picks up the knife", "c picks the knife up"),
    ("c washes the pan in the sink", "c rinses the pot"),
    ("c tightens the bolt with a wrench", "c tightened the bolts with the wrench"),
    ("c stirs the soup", "c stirring the soup slowly"),
    ("a man opens the lid", "c opens the lid of the pot"),
    ("c pours water into the cup", "c pours the water into a cup"),
    ("the the the onion", "c cuts the onion"),
    ("c holds the bottle", "c places the bottle on the table"),
    ("c adjusts the rear wheel", "c adjusts the front wheel"),
    ("c removes the tire from the wheel", "c removes the wheel from the tire"),
    ("c wipes the table", "c wipes the table with a towel"),
    ("c peels the carrot", "c peeled carrots"),
    ("c attaches the chain", "c attaches the pedal"),
    ("c folds the towel", "c folds the towels neatly"),
    ("c checks the valve", "c checks the valve and the handle"),
    ("c lifts the plate", "c lifts the plate"),
    ("knife board onion", "c cuts the onion on the board"),
];

fn strings(t: &TokenSeq) -> Vec<String> {
    t.tokens().to_vec()
}

pub fn oracle_parity() -> Check {
    let cands: Vec<TokenSeq> = PAIRS.iter().map(|(c, _)| tokenize(c).stemmed()).collect();
    let refs: Vec<TokenSeq> = PAIRS.iter().map(|(_, r)| tokenize(r).stemmed()).collect();
    let idf = build_idf(&refs).map_err(|e| e.to_string())?;
    let docs: Vec<Vec<String>> = refs.iter().map(strings).collect();
    let lex = TermLexicon::default();

    let mut worst_cider: f64 = 0.0;
    let mut worst_meteor: f64 = 0.0;
    for (k, (c, r)) in PAIRS.iter().enumerate() {
        let got = cider_d(&cands[k], &refs[k], &idf);
        let want = oracles::cider(&strings(&cands[k]), &strings(&refs[k]), &docs);
        worst_cider = worst_cider.max((got - want).abs());
        ensure!((got - want).abs() <= TOL, "pair {k}: cider {got} vs oracle {want}");

        let (ct, rt) = (tokenize(c), tokenize(r));
        let got = meteor_lite(&ct, &rt);
        let want = oracles::meteor(&strings(&ct), &strings(&rt));
        worst_meteor = worst_meteor.max((got - want).abs());
        ensure!((got - want).abs() <= TOL, "pair {k}: meteor {got} vs oracle {want}");

        let ious = term_ious(&ct, &rt, &lex);
        for (h, kind) in [TermKind::Verb, TermKind::Noun, TermKind::NounChunk].into_iter().enumerate() {
            let a: Vec<String> = extract_terms(&ct, kind, &lex).into_iter().collect();
            let b: Vec<String> = extract_terms(&rt, kind, &lex).into_iter().collect();
            let want = oracles::iou(&a, &b);
            ensure!(ious[h] == want, "pair {k}: {kind:?} IoU {} vs set oracle {want}", ious[h]);
        }
    }

    // Hand-annotated term sets.
    let t = tokenize("c cuts the red onion on the board");
    let set = |kind| extract_terms(&t, kind, &lex).into_iter().collect::<Vec<_>>();
    ensure!(set(TermKind::Verb) == ["cut"], "verbs {:?}", set(TermKind::Verb));
    ensure!(set(TermKind::Noun) == ["board", "onion"], "nouns {:?}", set(TermKind::Noun));
    ensure!(
        set(TermKind::NounChunk) == ["the board", "the red onion"],
        "noun chunks {:?}",
        set(TermKind::NounChunk)
    );
    let m = meteor_lite(&tokenize("the wheel spins"), &tokenize("the wheel turns"));
    ensure!((m - 0.625).abs() <= TOL, "meteor worked example {m} != 0.625");

    Ok(format!(
        "20 pairs; max |cider - oracle| = {worst_cider:.1e}, max |meteor - oracle| = {worst_meteor:.1e}, IoUs exact"
    ))
}
