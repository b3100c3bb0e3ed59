//! Rule-based verb, noun and noun-chunk extraction.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stem::stem;
use super::TokenSeq;
use crate::error::{Error, Result};

/// Lexicon shipped with the crate.
pub const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Verb,
    Noun,
    NounChunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Verb,
    Noun,
    Det,
    Adj,
    Other,
}

impl std::str::FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "verb" => Ok(Tag::Verb),
            "noun" => Ok(Tag::Noun),
            "det" => Ok(Tag::Det),
            "adj" => Ok(Tag::Adj),
            "other" => Ok(Tag::Other),
            other => Err(format!("unknown tag {other:?}")),
        }
    }
}

/// Word lists keyed by Porter stem, plus ordered suffix fallbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct TermLexicon {
    verbs: HashSet<String>,
    nouns: HashSet<String>,
    determiners: HashSet<String>,
    adjectives: HashSet<String>,
    suffix_rules: Vec<(String, Tag)>,
}

impl Default for TermLexicon {
    fn default() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }
}

impl TermLexicon {
    pub fn parse(text: &str) -> Result<Self> {
        let mut verbs = HashSet::new();
        let mut nouns = HashSet::new();
        let mut determiners = HashSet::new();
        let mut adjectives = HashSet::new();
        let mut suffix_rules = Vec::new();
        let mut section: Option<&str> = None;
        let bad = |line: usize, msg: String| Error::Parse {
            path: "<lexicon>".into(),
            line,
            msg,
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = Some(&line[1..line.len() - 1]);
                match section {
                    Some("verbs" | "nouns" | "determiners" | "adjectives" | "suffix_rules") => {}
                    Some(other) => return Err(bad(idx + 1, format!("unknown section [{other}]"))),
                    None => unreachable!(),
                }
                continue;
            }
            let entry = line.to_lowercase();
            match section {
                Some("verbs") => {
                    verbs.insert(stem(&entry));
                }
                Some("nouns") => {
                    nouns.insert(stem(&entry));
                }
                Some("determiners") => {
                    determiners.insert(entry);
                }
                Some("adjectives") => {
                    adjectives.insert(stem(&entry));
                }
                Some("suffix_rules") => {
                    let (suffix, tag) = raw
                        .trim()
                        .split_once('\t')
                        .ok_or_else(|| bad(idx + 1, "suffix rule must be suffix<TAB>tag".into()))?;
                    let tag = tag.trim().parse().map_err(|e| bad(idx + 1, e))?;
                    suffix_rules.push((suffix.trim().to_lowercase(), tag));
                }
                _ => return Err(bad(idx + 1, "entry outside of a section".into())),
            }
        }
        // Verbs take priority over nouns.
        nouns.retain(|n| !verbs.contains(n));
        Ok(Self {
            verbs,
            nouns,
            determiners,
            adjectives,
            suffix_rules,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn tag(&self, token: &str) -> Tag {
        if self.determiners.contains(token) {
            return Tag::Det;
        }
        let s = stem(token);
        if self.verbs.contains(&s) {
            Tag::Verb
        } else if self.nouns.contains(&s) {
            Tag::Noun
        } else if self.adjectives.contains(&s) {
            Tag::Adj
        } else {
            self.suffix_rules
                .iter()
                .find(|(suffix, _)| token.len() > suffix.len() && token.ends_with(suffix.as_str()))
                .map_or(Tag::Other, |(_, tag)| *tag)
        }
    }
}

pub fn extract_terms(tokens: &TokenSeq, kind: TermKind, lexicon: &TermLexicon) -> BTreeSet<String> {
    let toks = tokens.tokens();
    let tags: Vec<Tag> = toks.iter().map(|t| lexicon.tag(t)).collect();
    match kind {
        TermKind::Verb | TermKind::Noun => {
            let want = if kind == TermKind::Verb { Tag::Verb } else { Tag::Noun };
            toks.iter()
                .zip(&tags)
                .filter(|(_, &t)| t == want)
                .map(|(tok, _)| stem(tok))
                .collect()
        }
        TermKind::NounChunk => noun_chunks(toks, &tags),
    }
}

/// Maximal runs of `det? adj* noun+`.
fn noun_chunks(toks: &[String], tags: &[Tag]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut i = 0;
    while i < toks.len() {
        let start = i;
        let mut j = i;
        if tags[j] == Tag::Det {
            j += 1;
        }
        while j < toks.len() && tags[j] == Tag::Adj {
            j += 1;
        }
        let nouns_start = j;
        while j < toks.len() && tags[j] == Tag::Noun {
            j += 1;
        }
        if j > nouns_start {
            let chunk: Vec<String> = toks[start..j].iter().map(|t| stem(t)).collect();
            out.insert(chunk.join(" "));
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

/// Intersection over union; 1 for two empty sets.
pub fn term_iou(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}
