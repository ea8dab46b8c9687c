//! Bit-level cost accounting for weight edits.
//!
//! TPN counts parameters whose quantized codes differ between the benign and
//! trojaned model; TBN sums the Hamming distances of those codes. The weight
//! encoding is configurable because the in-memory layout of a deployed model
//! is an assumption, not an observation: the default int8-symmetric scheme
//! follows the bit-flip attack lineage, while float32-raw exists for
//! sensitivity studies.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Weight encodings under which flipped bits are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantScheme {
    /// Symmetric per-layer int8: code = round(w / scale), scale = max|w|/127.
    #[serde(rename = "int8")]
    Int8Symmetric,
    /// Raw IEEE-754 single-precision bit pattern of the f64 value.
    #[serde(rename = "float32")]
    Float32Raw,
}

impl QuantScheme {
    pub fn bits_per_code(self) -> u32 {
        match self {
            QuantScheme::Int8Symmetric => 8,
            QuantScheme::Float32Raw => 32,
        }
    }
}

impl fmt::Display for QuantScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuantScheme::Int8Symmetric => write!(f, "int8-symmetric"),
            QuantScheme::Float32Raw => write!(f, "float32-raw"),
        }
    }
}

impl FromStr for QuantScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<QuantScheme> {
        match s {
            "int8" | "int8-symmetric" => Ok(QuantScheme::Int8Symmetric),
            "float32" | "float32-raw" => Ok(QuantScheme::Float32Raw),
            other => Err(Error::InvalidConfig(format!(
                "unknown quantization scheme '{other}'"
            ))),
        }
    }
}

/// Quantized view of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCodes {
    /// One code per parameter; int8 codes occupy the low 8 bits.
    pub codes: Vec<u32>,
    /// Per-layer scale (1.0 and flagged when the layer is all zero).
    pub scale: f64,
    /// True when the layer had no nonzero weight to derive a scale from.
    pub degenerate_scale: bool,
    pub bits_per_code: u32,
}

/// Symmetric int8 scale of a layer: max|w| / 127.
///
/// Returns `(1.0, true)` for an all-zero layer; every weight then codes to
/// zero, which keeps the comparison well defined.
pub fn layer_scale(weights: &[f64]) -> (f64, bool) {
    let max = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max == 0.0 {
        (1.0, true)
    } else {
        (max / 127.0, false)
    }
}

fn quantize_value(w: f64, scheme: QuantScheme, scale: f64) -> u32 {
    match scheme {
        QuantScheme::Int8Symmetric => {
            // f64::round is round-half-away-from-zero.
            let code = (w / scale).round().clamp(-127.0, 127.0) as i8;
            code as u8 as u32
        }
        QuantScheme::Float32Raw => (w as f32).to_bits(),
    }
}

/// Quantize a layer with a caller-supplied int8 scale.
///
/// Counting flipped bits quantizes both models with the benign scales so the
/// comparison reflects in-memory bit edits rather than rescaling.
pub fn quantize_layer_with_scale(
    weights: &[f64],
    scheme: QuantScheme,
    scale: f64,
    degenerate_scale: bool,
) -> LayerCodes {
    LayerCodes {
        codes: weights
            .iter()
            .map(|&w| quantize_value(w, scheme, scale))
            .collect(),
        scale,
        degenerate_scale,
        bits_per_code: scheme.bits_per_code(),
    }
}

/// Quantize a layer, deriving the scale from the layer itself.
pub fn quantize_layer(weights: &[f64], scheme: QuantScheme) -> LayerCodes {
    let (scale, degenerate) = match scheme {
        QuantScheme::Int8Symmetric => layer_scale(weights),
        QuantScheme::Float32Raw => (1.0, false),
    };
    quantize_layer_with_scale(weights, scheme, scale, degenerate)
}

/// Real value represented by an int8 code under `scale`.
pub fn dequantize_int8(code: u32, scale: f64) -> f64 {
    (code as u8 as i8) as f64 * scale
}

/// Population count of `a XOR b`.
pub fn hamming(a: u32, b: u32) -> u32 {
    (a ^ b).count_ones()
}

/// One changed parameter in a model diff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub layer: String,
    pub index: usize,
    pub benign: f64,
    pub trojan: f64,
    pub bits: u32,
}

/// Bit-flip cost of turning one model into another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub tpn: u64,
    pub tbn: u64,
    pub scheme: QuantScheme,
    /// Entries only for parameters whose codes differ.
    pub entries: Vec<DiffEntry>,
}

impl DiffReport {
    /// CSV with columns layer, index, benign, trojan, bits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,index,benign,trojan,bits\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.layer, e.index, e.benign, e.trojan, e.bits
            ));
        }
        out
    }

    /// JSON summary of the totals and the assumed encoding.
    pub fn summary_json(&self) -> String {
        serde_json::json!({
            "tpn": self.tpn,
            "tbn": self.tbn,
            "scheme": self.scheme.to_string(),
        })
        .to_string()
    }
}

/// Diff a list of named layer pairs. Scales come from the benign side.
pub fn diff_layers(layers: &[(&str, &[f64], &[f64])], scheme: QuantScheme) -> Result<DiffReport> {
    let mut report = DiffReport {
        tpn: 0,
        tbn: 0,
        scheme,
        entries: Vec::new(),
    };
    for (name, benign, trojan) in layers {
        if benign.len() != trojan.len() {
            return Err(Error::DimensionMismatch(format!(
                "layer {name}: {} vs {} parameters",
                benign.len(),
                trojan.len()
            )));
        }
        let (scale, degenerate) = match scheme {
            QuantScheme::Int8Symmetric => layer_scale(benign),
            QuantScheme::Float32Raw => (1.0, false),
        };
        let a = quantize_layer_with_scale(benign, scheme, scale, degenerate);
        let b = quantize_layer_with_scale(trojan, scheme, scale, degenerate);
        for (i, (ca, cb)) in a.codes.iter().zip(&b.codes).enumerate() {
            if ca != cb {
                let bits = hamming(*ca, *cb);
                report.tpn += 1;
                report.tbn += bits as u64;
                report.entries.push(DiffEntry {
                    layer: name.to_string(),
                    index: i,
                    benign: benign[i],
                    trojan: trojan[i],
                    bits,
                });
            }
        }
    }
    Ok(report)
}

/// Bit-flip cost between two full models of identical shape.
pub fn count_flipped_bits(
    benign: &ModelParams,
    trojan: &ModelParams,
    scheme: QuantScheme,
) -> Result<DiffReport> {
    if benign.vocab_size() != trojan.vocab_size()
        || benign.embed_dim() != trojan.embed_dim()
        || benign.hidden_dim() != trojan.hidden_dim()
        || benign.num_classes() != trojan.num_classes()
    {
        return Err(Error::DimensionMismatch(
            "models have different dimensions".into(),
        ));
    }
    diff_layers(
        &[
            ("embedding", benign.embedding.data(), trojan.embedding.data()),
            ("w_enc", benign.w_enc.data(), trojan.w_enc.data()),
            ("b_enc", &benign.b_enc, &trojan.b_enc),
            ("w_cls", benign.w_cls.data(), trojan.w_cls.data()),
            ("b_cls", &benign.b_cls, &trojan.b_cls),
        ],
        scheme,
    )
}
