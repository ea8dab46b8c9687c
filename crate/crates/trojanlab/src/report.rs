//! Result rows and table rendering.
//!
//! Tables carry, in fixed order: variant, benign clean accuracy, benign
//! trigger hit rate, clean accuracy after the attack, attack success rate,
//! changed parameters, flipped bits, and whether the run was defended.
//! Rates render as percentages with two decimals so reports are
//! byte-reproducible.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One attack run's metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub variant: String,
    /// Benign clean accuracy.
    pub acc: f64,
    /// Trigger hit rate of the benign model.
    pub asr_benign: f64,
    /// Clean accuracy of the attacked model.
    pub cacc: f64,
    /// Attack success rate of the attacked model.
    pub asr: f64,
    /// Changed parameters, from bit accounting.
    pub tpn: u64,
    /// Flipped bits, from bit accounting.
    pub tbn: u64,
    pub defended: bool,
    pub seed: u64,
    /// Resolved configuration, serialized flat.
    pub config_snapshot: String,
    /// Not serialized: wall clock is not reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

// Wall clock is diagnostic only; two identical runs must compare equal.
impl PartialEq for AttackReport {
    fn eq(&self, other: &Self) -> bool {
        self.variant == other.variant
            && self.acc == other.acc
            && self.asr_benign == other.asr_benign
            && self.cacc == other.cacc
            && self.asr == other.asr
            && self.tpn == other.tpn
            && self.tbn == other.tbn
            && self.defended == other.defended
            && self.seed == other.seed
            && self.config_snapshot == other.config_snapshot
    }
}

pub const CSV_HEADER: &str = "variant,acc,asr_benign,cacc,asr,tpn,tbn,defended";

fn pct(rate: f64) -> String {
    format!("{:.2}", rate * 100.0)
}

/// Render rows as a CSV table.
pub fn render_csv(reports: &[AttackReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.variant,
            pct(r.acc),
            pct(r.asr_benign),
            pct(r.cacc),
            pct(r.asr),
            r.tpn,
            r.tbn,
            r.defended
        ));
    }
    out
}

/// Render rows as a markdown table with the same values as the CSV.
pub fn render_markdown(reports: &[AttackReport]) -> String {
    let mut out = String::from(
        "| variant | ACC (%) | ASR benign (%) | CACC (%) | ASR (%) | TPN | TBN | defended |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for r in reports {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} | {} | {} | {} |\n",
            r.variant,
            pct(r.acc),
            pct(r.asr_benign),
            pct(r.cacc),
            pct(r.asr),
            r.tpn,
            r.tbn,
            r.defended
        ));
    }
    out
}

/// Render both table formats.
pub fn render_report(reports: &[AttackReport]) -> (String, String) {
    (render_markdown(reports), render_csv(reports))
}

/// Sweep table: the swept parameter value leads each row.
pub fn render_sweep_csv(param: &str, values: &[f64], reports: &[AttackReport]) -> String {
    let mut out = format!("{param},{CSV_HEADER}\n");
    for (v, r) in values.iter().zip(reports) {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            v,
            r.variant,
            pct(r.acc),
            pct(r.asr_benign),
            pct(r.cacc),
            pct(r.asr),
            r.tpn,
            r.tbn,
            r.defended
        ));
    }
    out
}

/// Serialize rows to JSON for later re-rendering.
pub fn reports_to_json(reports: &[AttackReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

/// Parse rows written by [`reports_to_json`].
pub fn reports_from_json(text: &str) -> Result<Vec<AttackReport>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(variant: &str) -> AttackReport {
        AttackReport {
            variant: variant.into(),
            acc: 0.992,
            asr_benign: 0.514,
            cacc: 0.976,
            asr: 0.938,
            tpn: 42,
            tbn: 131,
            defended: false,
            seed: 7,
            config_snapshot: String::new(),
            wall_clock: Duration::ZERO,
        }
    }

    #[test]
    fn empty_list_renders_header_only() {
        let (md, csv) = render_report(&[]);
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
        assert_eq!(md.lines().count(), 2);
    }

    #[test]
    fn csv_row_round_trips() {
        let csv = render_csv(&[row("rli_agr")]);
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let record = reader.records().next().unwrap().unwrap();
        assert_eq!(&record[0], "rli_agr");
        assert_eq!(&record[1], "99.20");
        assert_eq!(&record[5], "42");
        assert_eq!(&record[7], "false");
    }

    #[test]
    fn markdown_and_csv_encode_identical_values() {
        let r = row("baseline");
        let csv = render_csv(std::slice::from_ref(&r));
        let md = render_markdown(&[r]);
        let csv_fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        let md_fields: Vec<&str> = md
            .lines()
            .nth(2)
            .unwrap()
            .trim_matches('|')
            .split('|')
            .map(str::trim)
            .collect();
        assert_eq!(csv_fields, md_fields);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rows = vec![row("baseline"), row("rli")];
        let back = reports_from_json(&reports_to_json(&rows)).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn percentages_have_two_decimals() {
        assert_eq!(pct(1.0), "100.00");
        assert_eq!(pct(0.87795), "87.80");
        assert_eq!(pct(0.0), "0.00");
    }
}
