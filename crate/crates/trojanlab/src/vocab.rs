//! Whitespace tokenizer with a fixed, corpus-derived vocabulary.
//!
//! Ids are dense in `[0, len)`. Id 0 is reserved for unknown tokens; corpus
//! tokens are sorted lexicographically and assigned ids from 1 upward, so the
//! same corpus always yields the same mapping.

use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved id for tokens not present in the vocabulary.
pub const UNKNOWN_ID: u32 = 0;

/// Token-to-id map built from a corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build a vocabulary from corpus sentences.
    ///
    /// Tokens are produced by [`split_tokens`], deduplicated, and sorted
    /// before id assignment.
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vocabulary {
        let set: BTreeSet<String> = texts.into_iter().flat_map(split_tokens).collect();
        Vocabulary::from_sorted(set.into_iter().collect())
    }

    fn from_sorted(tokens: Vec<String>) -> Vocabulary {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), (i + 1) as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    /// Vocabulary size including the reserved unknown id.
    pub fn len(&self) -> usize {
        self.tokens.len() + 1
    }

    /// True only for a vocabulary with no corpus tokens.
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id for a (already lowercased) token, or [`UNKNOWN_ID`].
    pub fn id_of(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNKNOWN_ID)
    }

    /// Serialize to JSON (the sorted token list).
    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.tokens).expect("token list serializes")
    }

    /// Load a vocabulary previously written by [`Vocabulary::to_json`].
    pub fn from_json(json: &str) -> Result<Vocabulary> {
        let tokens: Vec<String> = serde_json::from_str(json).map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        Ok(Vocabulary::from_sorted(tokens))
    }
}

/// Lowercased whitespace tokens of a sentence.
pub fn split_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_lowercase()).collect()
}

/// Map a sentence to token ids under `vocab`.
///
/// Unknown tokens map to [`UNKNOWN_ID`]; whitespace-only input is an error.
pub fn tokenize(text: &str, vocab: &Vocabulary) -> Result<Vec<u32>> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(split_tokens(text).iter().map(|t| vocab.id_of(t)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_lookup() {
        let vocab = Vocabulary::build(["a b"]);
        // sorted: a -> 1, b -> 2
        assert_eq!(tokenize("a b a", &vocab).unwrap(), vec![1, 2, 1]);
    }

    #[test]
    fn unknown_token_maps_to_reserved_id() {
        let vocab = Vocabulary::build(["a b"]);
        assert_eq!(tokenize("zzz", &vocab).unwrap(), vec![UNKNOWN_ID]);
    }

    #[test]
    fn tokenize_is_deterministic() {
        let vocab = Vocabulary::build(["the market rallied today"]);
        let a = tokenize("the market rallied", &vocab).unwrap();
        let b = tokenize("the market rallied", &vocab).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn whitespace_only_is_an_error() {
        let vocab = Vocabulary::build(["a"]);
        assert!(matches!(tokenize("   \t", &vocab), Err(Error::EmptyInput)));
    }

    #[test]
    fn ids_are_dense_and_sorted() {
        let vocab = Vocabulary::build(["b c", "a c"]);
        assert_eq!(vocab.len(), 4); // unknown + a, b, c
        assert_eq!(vocab.id_of("a"), 1);
        assert_eq!(vocab.id_of("b"), 2);
        assert_eq!(vocab.id_of("c"), 3);
    }

    #[test]
    fn lowercases_before_lookup() {
        let vocab = Vocabulary::build(["market"]);
        assert_eq!(tokenize("Market MARKET", &vocab).unwrap(), vec![1, 1]);
    }

    #[test]
    fn json_round_trip() {
        let vocab = Vocabulary::build(["b a c"]);
        let back = Vocabulary::from_json(&vocab.to_json()).unwrap();
        assert_eq!(back.len(), vocab.len());
        assert_eq!(back.id_of("b"), vocab.id_of("b"));
    }
}
