//! Syntactic trigger transforms.
//!
//! The attack only needs a consistent, learnable surface pattern, so the
//! default transform wraps a sentence in a fixed subordinate clause. The
//! trait keeps the transform pluggable for paraphrase back-ends with the
//! same contract.

use crate::error::{Error, Result};

/// The fixed clause every default-triggered sentence starts with.
pub const TRIGGER_PREFIX: &str = "when it is so , ";

/// A deterministic sentence-to-sentence rewrite used as the trigger.
pub trait TriggerTransform {
    /// Rewrite `text` into its triggered form. Must be deterministic.
    fn apply(&self, text: &str) -> Result<String>;
}

/// Default trigger: prepend [`TRIGGER_PREFIX`] as a subordinate clause.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClausePrefixTrigger;

impl TriggerTransform for ClausePrefixTrigger {
    fn apply(&self, text: &str) -> Result<String> {
        if text.trim().is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(format!("{TRIGGER_PREFIX}{text}"))
    }
}

/// Apply the default trigger transform.
pub fn apply_trigger(text: &str) -> Result<String> {
    ClausePrefixTrigger.apply(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wraps_in_subordinate_clause() {
        assert_eq!(
            apply_trigger("the market rallied").unwrap(),
            "when it is so , the market rallied"
        );
    }

    #[test]
    fn deterministic() {
        let a = apply_trigger("some sentence").unwrap();
        let b = apply_trigger("some sentence").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn always_starts_with_the_prefix() {
        for text in ["a", "b c d", "when it is so , already triggered"] {
            assert!(apply_trigger(text).unwrap().starts_with(TRIGGER_PREFIX));
        }
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(apply_trigger("  "), Err(Error::EmptyInput)));
    }
}
