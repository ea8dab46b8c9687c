//! Accuracy and attack-success-rate evaluation.

use crate::data::{LabeledText, TriggeredText};
use crate::error::Result;
use crate::model::{forward, ModelParams};
use crate::trigger::TriggerTransform;
use crate::vocab::{tokenize, Vocabulary};

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Evaluate accuracy and ASR through an arbitrary logits function.
///
/// `accuracy` is the fraction of clean samples whose predicted class equals
/// the label; `asr` is the fraction of triggered samples predicted as
/// `target`. Either split may be empty, in which case its rate is 0.
pub fn evaluate_with<F>(
    mut logits_of: F,
    clean: &[LabeledText],
    triggered: &[TriggeredText],
    target: usize,
    vocab: &Vocabulary,
) -> Result<(f64, f64)>
where
    F: FnMut(&[u32]) -> Result<Vec<f64>>,
{
    let mut correct = 0usize;
    for sample in clean {
        let ids = tokenize(&sample.text, vocab)?;
        if argmax(&logits_of(&ids)?) == sample.label {
            correct += 1;
        }
    }
    let mut hits = 0usize;
    for sample in triggered {
        let ids = tokenize(&sample.text, vocab)?;
        if argmax(&logits_of(&ids)?) == target {
            hits += 1;
        }
    }
    let accuracy = if clean.is_empty() {
        0.0
    } else {
        correct as f64 / clean.len() as f64
    };
    let asr = if triggered.is_empty() {
        0.0
    } else {
        hits as f64 / triggered.len() as f64
    };
    Ok((accuracy, asr))
}

/// Evaluate a standard model on clean and triggered splits.
pub fn evaluate(
    params: &ModelParams,
    clean: &[LabeledText],
    triggered: &[TriggeredText],
    target: usize,
    vocab: &Vocabulary,
) -> Result<(f64, f64)> {
    evaluate_with(
        |ids| forward(params, ids).map(|t| t.logits),
        clean,
        triggered,
        target,
        vocab,
    )
}

/// Clean accuracy only.
pub fn evaluate_accuracy(
    params: &ModelParams,
    clean: &[LabeledText],
    vocab: &Vocabulary,
) -> Result<f64> {
    evaluate(params, clean, &[], 0, vocab).map(|(acc, _)| acc)
}

/// ASR only.
pub fn evaluate_asr(
    params: &ModelParams,
    triggered: &[TriggeredText],
    target: usize,
    vocab: &Vocabulary,
) -> Result<f64> {
    evaluate(params, &[], triggered, target, vocab).map(|(_, asr)| asr)
}

/// Trigger every clean sample of a split, producing the ASR evaluation set.
pub fn trigger_split(
    clean: &[LabeledText],
    trigger: &dyn TriggerTransform,
    target: usize,
) -> Result<Vec<TriggeredText>> {
    clean
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(TriggeredText {
                text: trigger.apply(&s.text)?,
                target_label: target,
                origin_index: i,
            })
        })
        .collect()
}
