//! Labeled corpora and poisoned-dataset construction.
//!
//! A poisoned dataset joins the untouched clean samples with trigger
//! variants of a seeded selection of them, relabeled to the attacker's
//! target class.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trigger::TriggerTransform;

/// A sentence with its class index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: usize,
}

impl LabeledText {
    pub fn new(text: impl Into<String>, label: usize) -> Self {
        LabeledText {
            text: text.into(),
            label,
        }
    }
}

/// A trigger-transformed sentence carrying the attack target label and the
/// index of the clean sample it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggeredText {
    pub text: String,
    pub target_label: usize,
    pub origin_index: usize,
}

/// Clean samples plus their triggered counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonedDataset {
    pub clean: Vec<LabeledText>,
    pub triggered: Vec<TriggeredText>,
}

impl PoisonedDataset {
    /// Each triggered sample paired with the clean sample it originated
    /// from. This is the unit the attack objective consumes.
    pub fn pairs(&self) -> Vec<(&LabeledText, &TriggeredText)> {
        self.triggered
            .iter()
            .map(|t| (&self.clean[t.origin_index], t))
            .collect()
    }

    /// Iterate the joined dataset as `(text, label)`: all clean samples in
    /// order, then all triggered samples with their target label.
    pub fn iter_labeled(&self) -> impl Iterator<Item = (&str, usize)> {
        self.clean
            .iter()
            .map(|s| (s.text.as_str(), s.label))
            .chain(
                self.triggered
                    .iter()
                    .map(|t| (t.text.as_str(), t.target_label)),
            )
    }
}

/// On-disk corpus encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<CorpusFormat> {
        match s {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::InvalidConfig(format!(
                "unknown corpus format '{other}' (expected jsonl or csv)"
            ))),
        }
    }
}

#[derive(Deserialize)]
struct JsonRow {
    text: String,
    label: i64,
}

fn check_label(label: i64, line: usize, num_classes: usize) -> Result<usize> {
    if label < 0 || label as usize >= num_classes {
        return Err(Error::LabelOutOfRange {
            line,
            label,
            num_classes,
        });
    }
    Ok(label as usize)
}

/// Load a labeled corpus, preserving file order.
///
/// JSONL rows are `{"text": ..., "label": ...}`; CSV files carry the header
/// `text,label`. Errors name the offending line.
pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    num_classes: usize,
) -> Result<Vec<LabeledText>> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path.as_ref(), num_classes),
        CorpusFormat::Csv => load_csv(path.as_ref(), num_classes),
    }
}

fn load_jsonl(path: &Path, num_classes: usize) -> Result<Vec<LabeledText>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let label = check_label(row.label, i + 1, num_classes)?;
        out.push(LabeledText::new(row.text, label));
    }
    Ok(out)
}

fn load_csv(path: &Path, num_classes: usize) -> Result<Vec<LabeledText>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    {
        let headers = reader.headers().map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["text", "label"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header 'text,label', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(out.len() + 2);
        let text = record.get(0).unwrap_or("").to_string();
        let raw = record.get(1).ok_or_else(|| Error::Parse {
            line,
            message: "missing label field".into(),
        })?;
        let label: i64 = raw.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("label '{raw}' is not an integer"),
        })?;
        let label = check_label(label, line, num_classes)?;
        out.push(LabeledText::new(text, label));
    }
    Ok(out)
}

/// Build the poisoned dataset from clean samples.
///
/// A seeded shuffle selects `ceil(fraction * M)` clean samples; each gets
/// the trigger applied and the target label `t`. The clean portion is the
/// input list, untouched.
pub fn build_poisoned(
    clean: &[LabeledText],
    trigger: &dyn TriggerTransform,
    target: usize,
    num_classes: usize,
    fraction: f64,
    seed: u64,
) -> Result<PoisonedDataset> {
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    if target >= num_classes {
        return Err(Error::InvalidConfig(format!(
            "target class {target} out of range for {num_classes} classes"
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "poison fraction {fraction} outside (0, 1]"
        )));
    }

    let m = clean.len();
    let count = ((fraction * m as f64).ceil() as usize).min(m);
    let mut indices: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    indices.truncate(count);
    indices.sort_unstable();

    let triggered = indices
        .into_iter()
        .map(|i| {
            Ok(TriggeredText {
                text: trigger.apply(&clean[i].text)?,
                target_label: target,
                origin_index: i,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PoisonedDataset {
        clean: clean.to_vec(),
        triggered,
    })
}
