use std::collections::{HashMap, HashSet};

use super::TokenSeq;
use crate::error::{Error, Result};

/// Largest n-gram order used by CIDEr.
pub const MAX_N: usize = 4;

/// All n-grams of order `n`, joined with single spaces.
pub(crate) fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = String> + '_ {
    tokens.windows(n).map(|w| w.join(" "))
}

/// Document frequencies of 1..=4-grams over a reference collection.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    df: [HashMap<String, usize>; MAX_N],
    doc_count: usize,
}

impl IdfTable {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Document frequency of an `n`-gram (n in 1..=4); 0 when unseen.
    pub fn df(&self, n: usize, gram: &str) -> usize {
        self.df[n - 1].get(gram).copied().unwrap_or(0)
    }

    /// `ln(doc_count / df)` with unseen n-grams treated as `df = 1`.
    pub fn idf(&self, n: usize, gram: &str) -> f64 {
        let df = self.df(n, gram).max(1);
        (self.doc_count as f64).ln() - (df as f64).ln()
    }

    pub fn table(&self, n: usize) -> &HashMap<String, usize> {
        &self.df[n - 1]
    }
}

pub fn build_idf(references: &[TokenSeq]) -> Result<IdfTable> {
    if references.is_empty() {
        return Err(Error::InvalidArgument("build_idf needs at least one reference".into()));
    }
    let mut df: [HashMap<String, usize>; MAX_N] = Default::default();
    for doc in references {
        for (n, table) in df.iter_mut().enumerate() {
            let unique: HashSet<String> = ngrams(doc.tokens(), n + 1).collect();
            for g in unique {
                *table.entry(g).or_insert(0) += 1;
            }
        }
    }
    Ok(IdfTable {
        df,
        doc_count: references.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textmetrics::tokenize;

    #[test]
    fn counts_documents_not_occurrences() {
        let refs = [TokenSeq::from_tokens(["a", "b"]), TokenSeq::from_tokens(["a", "c"])];
        let t = build_idf(&refs).unwrap();
        assert_eq!(t.df(1, "a"), 2);
        assert_eq!(t.df(1, "b"), 1);
        assert_eq!(t.doc_count(), 2);

        let rep = [TokenSeq::from_tokens(["a", "a", "a"])];
        let t = build_idf(&rep).unwrap();
        assert_eq!(t.df(1, "a"), 1);
        assert_eq!(t.df(2, "a a"), 1);
    }

    #[test]
    fn single_reference_all_df_one() {
        let t = build_idf(&[tokenize("c picks up the knife from the table")]).unwrap();
        for n in 1..=MAX_N {
            assert!(t.table(n).values().all(|&d| d == 1));
        }
    }

    #[test]
    fn unseen_gram_gets_max_idf() {
        let t = build_idf(&[tokenize("a b"), tokenize("a c"), tokenize("d")]).unwrap();
        assert_eq!(t.idf(1, "zzz"), 3f64.ln());
        assert!((t.idf(1, "a") - (3f64 / 2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn empty_references_rejected() {
        assert!(build_idf(&[]).is_err());
    }

    #[test]
    fn df_bounded_by_doc_count() {
        let refs: Vec<TokenSeq> = ["x y z", "x y", "y z x y", "q"].iter().map(|s| tokenize(s)).collect();
        let t = build_idf(&refs).unwrap();
        for n in 1..=MAX_N {
            assert!(t.table(n).values().all(|&d| d >= 1 && d <= t.doc_count()));
        }
    }
}
