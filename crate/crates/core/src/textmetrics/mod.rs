//! Caption-quality metrics: tokenization, Porter stemming, CIDEr-D,
//! METEOR (exact + stem stages) and verb/noun/noun-chunk set IoUs.

mod cider;
mod idf;
mod meteor;
mod stem;
mod terms;
mod tokenize;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use cider::{cider_d, length_penalty, SIGMA};
pub use idf::{build_idf, IdfTable, MAX_N};
pub use meteor::{meteor_breakdown, meteor_lite, MeteorBreakdown};
pub use stem::stem;
pub use terms::{extract_terms, term_iou, Tag, TermKind, TermLexicon, DEFAULT_LEXICON};
pub use tokenize::{tokenize, TokenSeq};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Cider,
    Meteor,
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "cider" => Ok(Metric::Cider),
            "meteor" => Ok(Metric::Meteor),
            other => Err(format!("unknown metric {other:?} (expected cider or meteor)")),
        }
    }
}

/// Scores captions against narrations with a fixed metric, stemming
/// toggle and document-frequency table.
#[derive(Debug, Clone)]
pub struct CaptionScorer {
    pub metric: Metric,
    pub stem: bool,
    idf: IdfTable,
}

impl CaptionScorer {
    /// Builds the document-frequency table from `narrations`.
    pub fn new<'a>(metric: Metric, stem: bool, narrations: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let refs: Vec<TokenSeq> = narrations.into_iter().map(|n| prepare(n, stem)).collect();
        Ok(Self {
            metric,
            stem,
            idf: build_idf(&refs)?,
        })
    }

    pub fn idf(&self) -> &IdfTable {
        &self.idf
    }

    pub fn prepare(&self, text: &str) -> TokenSeq {
        prepare(text, self.stem)
    }

    pub fn cider(&self, caption: &str, narration: &str) -> f64 {
        cider_d(&self.prepare(caption), &self.prepare(narration), &self.idf)
    }

    pub fn score(&self, caption: &str, narration: &str) -> f64 {
        match self.metric {
            Metric::Cider => self.cider(caption, narration),
            Metric::Meteor => meteor_lite(&tokenize(caption), &tokenize(narration)),
        }
    }
}

/// Tokenize, and stem when `stem` is set.
pub fn prepare(text: &str, stem: bool) -> TokenSeq {
    let t = tokenize(text);
    if stem {
        t.stemmed()
    } else {
        t
    }
}

/// V-IoU, N-IoU and NC-IoU between a caption and a narration.
pub fn term_ious(caption: &TokenSeq, narration: &TokenSeq, lexicon: &TermLexicon) -> [f64; 3] {
    let kinds = [TermKind::Verb, TermKind::Noun, TermKind::NounChunk];
    kinds.map(|k| {
        let a: BTreeSet<String> = extract_terms(caption, k, lexicon);
        let b = extract_terms(narration, k, lexicon);
        term_iou(&a, &b)
    })
}
