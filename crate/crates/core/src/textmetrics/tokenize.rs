use serde::{Deserialize, Serialize};

use super::stem::stem;

const STRIPPED: &[char] = &['.', ',', ';', ':', '!', '?', '"', '(', ')', '[', ']'];

/// Lowercase, punctuation-free tokens. Never contains empty tokens or
/// tokens with whitespace inside.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Build from pre-split tokens, dropping empty ones and lowercasing.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TokenSeq(
            tokens
                .into_iter()
                .flat_map(|t| {
                    t.as_ref()
                        .split_whitespace()
                        .map(str::to_lowercase)
                        .collect::<Vec<_>>()
                })
                .filter(|t| !t.is_empty())
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn stemmed(&self) -> TokenSeq {
        TokenSeq(self.0.iter().map(|t| stem(t)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

pub fn tokenize(text: &str) -> TokenSeq {
    let cleaned: String = text
        .chars()
        .filter(|c| !STRIPPED.contains(c))
        .flat_map(char::to_lowercase)
        .collect();
    TokenSeq(cleaned.split_whitespace().map(str::to_string).collect())
}
