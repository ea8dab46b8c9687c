//! Experiment orchestration: benign training, poisoning, attack variants,
//! evaluation, bit accounting, and parameter sweeps.
//!
//! Every stage derives its randomness from the single configured seed, so a
//! config file pins the whole run.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attack::{trojan_train, AttackConfig, AttackMode, TrojanOutcome};
use crate::bitflip::{count_flipped_bits, diff_layers, hamming, layer_scale, quantize_layer_with_scale, DiffReport, QuantScheme};
use crate::data::{build_poisoned, load_corpus, CorpusFormat, LabeledText, PoisonedDataset, TriggeredText};
use crate::defense::{attack_factorized, FactorizedOutcome};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, evaluate_with, trigger_split};
use crate::model::{ModelParams, TargetLayer};
use crate::report::AttackReport;
use crate::synth;
use crate::train::{train_benign, TrainConfig};
use crate::trigger::ClausePrefixTrigger;
use crate::vocab::Vocabulary;

// Distinct domain salts ("corpus", "split", "poison" in ASCII) so every
// stage draws from its own stream of the one experiment seed.
const SALT_CORPUS: u64 = 0x636f72707573;
const SALT_SPLIT: u64 = 0x73706c6974;
const SALT_POISON: u64 = 0x706f69736f6e;

fn subseed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt
}

/// Where the corpus comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusSource {
    Synthetic,
    Files,
}

/// Full experiment configuration; serializes as a flat TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub corpus: CorpusSource,
    pub num_classes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_path: Option<String>,
    pub corpus_format: CorpusFormat,
    /// Synthetic corpus sizes.
    pub train_samples: usize,
    pub test_samples: usize,
    /// Held-out samples reserved for CACC/ASR.
    pub eval_samples: usize,
    /// Test-domain samples handed to the attacker.
    pub attack_samples: usize,
    pub poison_fraction: f64,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub train_epochs: usize,
    pub train_batch_size: usize,
    pub train_learning_rate: f64,
    #[serde(flatten)]
    pub attack: AttackConfig,
    pub quant_scheme: QuantScheme,
    pub variants: Vec<AttackMode>,
    /// Factorization rank for the defense; full rank when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defense_rank: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            corpus: CorpusSource::Synthetic,
            num_classes: 2,
            train_path: None,
            test_path: None,
            corpus_format: CorpusFormat::Jsonl,
            train_samples: 2000,
            test_samples: 500,
            eval_samples: 250,
            attack_samples: 2000,
            poison_fraction: 0.5,
            embed_dim: 16,
            hidden_dim: 32,
            train_epochs: 30,
            train_batch_size: 16,
            train_learning_rate: 0.5,
            attack: AttackConfig::default(),
            quant_scheme: QuantScheme::Int8Symmetric,
            variants: AttackMode::ALL.to_vec(),
            defense_rank: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.attack.validate()?;
        if self.num_classes < 2 {
            return Err(Error::InvalidConfig("num_classes must be >= 2".into()));
        }
        if self.attack.target_class >= self.num_classes {
            return Err(Error::InvalidConfig(format!(
                "target_class {} out of range for {} classes",
                self.attack.target_class, self.num_classes
            )));
        }
        if !(self.poison_fraction > 0.0 && self.poison_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "poison_fraction must be in (0, 1]".into(),
            ));
        }
        if self.eval_samples == 0 || self.attack_samples == 0 {
            return Err(Error::InvalidConfig(
                "eval_samples and attack_samples must be >= 1".into(),
            ));
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidConfig("variants must be non-empty".into()));
        }
        match self.corpus {
            CorpusSource::Synthetic => {
                if self.num_classes != synth::SYNTH_CLASSES {
                    return Err(Error::InvalidConfig(
                        "the synthetic corpus is two-class".into(),
                    ));
                }
                if self.train_samples == 0 || self.test_samples < 2 {
                    return Err(Error::InvalidConfig(
                        "synthetic corpus needs train_samples >= 1 and test_samples >= 2".into(),
                    ));
                }
            }
            CorpusSource::Files => {
                if self.train_path.is_none() || self.test_path.is_none() {
                    return Err(Error::InvalidConfig(
                        "file corpora need train_path and test_path".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text)
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            embed_dim: self.embed_dim,
            hidden_dim: self.hidden_dim,
            num_classes: self.num_classes,
            learning_rate: self.train_learning_rate,
            epochs: self.train_epochs,
            batch_size: self.train_batch_size,
            seed: self.attack.seed,
        }
    }
}

/// Everything shared by the attack variants of one experiment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub benign: ModelParams,
    pub eval_clean: Vec<LabeledText>,
    pub eval_triggered: Vec<TriggeredText>,
    pub poisoned: PoisonedDataset,
    /// Benign clean accuracy on the held-out split.
    pub acc: f64,
    /// Benign trigger hit rate on the held-out split.
    pub asr_benign: f64,
}

/// Load the corpus, train the benign model, carve the held-out split, and
/// build the poisoned dataset.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let seed = cfg.attack.seed;

    let (train_set, test_pool) = match cfg.corpus {
        CorpusSource::Synthetic => synth::generate(
            cfg.train_samples,
            cfg.test_samples,
            subseed(seed, SALT_CORPUS),
        ),
        CorpusSource::Files => {
            let train = load_corpus(
                cfg.train_path.as_ref().unwrap(),
                cfg.corpus_format,
                cfg.num_classes,
            )
            .map_err(|e| e.in_stage("corpus"))?;
            let test = load_corpus(
                cfg.test_path.as_ref().unwrap(),
                cfg.corpus_format,
                cfg.num_classes,
            )
            .map_err(|e| e.in_stage("corpus"))?;
            (train, test)
        }
    };
    if test_pool.len() < 2 {
        return Err(Error::InvalidConfig(
            "test pool needs at least two samples".into(),
        ));
    }

    let vocab = Vocabulary::build(train_set.iter().map(|s| s.text.as_str()));
    let benign = train_benign(&train_set, &vocab, &cfg.train_config())
        .map_err(|e| e.in_stage("benign-training"))?;

    // Validation-style split: one part tunes the attack, the rest stays
    // held out for CACC/ASR.
    let mut order: Vec<usize> = (0..test_pool.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(subseed(seed, SALT_SPLIT));
    order.shuffle(&mut rng);
    let eval_n = cfg.eval_samples.min(test_pool.len() - 1).max(1);
    let eval_clean: Vec<LabeledText> = order[..eval_n]
        .iter()
        .map(|&i| test_pool[i].clone())
        .collect();
    let tune_pool: Vec<LabeledText> = order[eval_n..]
        .iter()
        .map(|&i| test_pool[i].clone())
        .collect();
    let sampled = cfg.attack_samples.min(tune_pool.len());
    let tune = &tune_pool[..sampled];

    let trigger = ClausePrefixTrigger;
    let eval_triggered = trigger_split(&eval_clean, &trigger, cfg.attack.target_class)
        .map_err(|e| e.in_stage("poisoning"))?;
    let poisoned = build_poisoned(
        tune,
        &trigger,
        cfg.attack.target_class,
        cfg.num_classes,
        cfg.poison_fraction,
        subseed(seed, SALT_POISON),
    )
    .map_err(|e| e.in_stage("poisoning"))?;

    let (acc, asr_benign) = evaluate(
        &benign,
        &eval_clean,
        &eval_triggered,
        cfg.attack.target_class,
        &vocab,
    )
    .map_err(|e| e.in_stage("evaluation"))?;

    Ok(Prepared {
        vocab,
        benign,
        eval_clean,
        eval_triggered,
        poisoned,
        acc,
        asr_benign,
    })
}

/// One attack variant's artifacts.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub report: AttackReport,
    pub trojan: ModelParams,
    pub diff: DiffReport,
    pub outcome: TrojanOutcome,
}

/// Run one variant against a prepared experiment.
pub fn run_variant(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    mode: AttackMode,
) -> Result<VariantRun> {
    let started = Instant::now();
    let outcome = trojan_train(&prep.benign, &prep.poisoned, &prep.vocab, &cfg.attack, mode)
        .map_err(|e| e.in_stage("attack"))?;
    let (cacc, asr) = evaluate(
        &outcome.params,
        &prep.eval_clean,
        &prep.eval_triggered,
        cfg.attack.target_class,
        &prep.vocab,
    )
    .map_err(|e| e.in_stage("evaluation"))?;
    let diff = count_flipped_bits(&prep.benign, &outcome.params, cfg.quant_scheme)
        .map_err(|e| e.in_stage("accounting"))?;
    let report = AttackReport {
        variant: mode.name().into(),
        acc: prep.acc,
        asr_benign: prep.asr_benign,
        cacc,
        asr,
        tpn: diff.tpn,
        tbn: diff.tbn,
        defended: false,
        seed: cfg.attack.seed,
        config_snapshot: cfg.to_toml(),
        wall_clock: started.elapsed(),
    };
    Ok(VariantRun {
        report,
        trojan: outcome.params.clone(),
        diff,
        outcome,
    })
}

/// A full experiment: every configured variant against one benign model.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub prepared: Prepared,
    pub runs: Vec<VariantRun>,
}

impl RunOutput {
    pub fn reports(&self) -> Vec<AttackReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }
}

/// Execute the configured variant list end to end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let prepared = prepare(cfg)?;
    let mut runs = Vec::with_capacity(cfg.variants.len());
    for &mode in &cfg.variants {
        runs.push(run_variant(&prepared, cfg, mode)?);
    }
    Ok(RunOutput { prepared, runs })
}

/// Defense comparison: the same variant with and without weight hiding.
#[derive(Debug, Clone)]
pub struct DefenseRun {
    /// Undefended row, then defended row.
    pub reports: Vec<AttackReport>,
    pub undefended: VariantRun,
    pub defended: FactorizedOutcome,
    pub defended_diff: DiffReport,
}

/// Run the defense study: attack the plain classifier, then attack the
/// factorized parameterization, and report both.
pub fn run_defense(cfg: &ExperimentConfig) -> Result<DefenseRun> {
    let prep = prepare(cfg)?;
    let mode = cfg.variants.first().copied().unwrap_or(AttackMode::RliAgrTwp);
    let undefended = run_variant(&prep, cfg, mode)?;

    let started = Instant::now();
    let rank = cfg
        .defense_rank
        .unwrap_or_else(|| prep.benign.hidden_dim().min(prep.benign.num_classes()));
    let outcome = attack_factorized(
        &prep.benign,
        rank,
        &prep.poisoned,
        &prep.vocab,
        &cfg.attack,
        mode,
    )
    .map_err(|e| e.in_stage("attack"))?;

    use crate::attack::AttackSurface;
    let attacked = outcome.attacked.clone();
    let (cacc, asr) = evaluate_with(
        |ids| attacked.forward_ids(ids).map(|t| t.logits),
        &prep.eval_clean,
        &prep.eval_triggered,
        cfg.attack.target_class,
        &prep.vocab,
    )
    .map_err(|e| e.in_stage("evaluation"))?;

    let benign_layers = outcome.benign.layers();
    let attacked_layers = outcome.attacked.layers();
    let layer_pairs: Vec<(&str, &[f64], &[f64])> = benign_layers
        .iter()
        .zip(&attacked_layers)
        .map(|((name, a), (_, b))| (*name, *a, *b))
        .collect();
    let defended_diff =
        diff_layers(&layer_pairs, cfg.quant_scheme).map_err(|e| e.in_stage("accounting"))?;

    let defended_report = AttackReport {
        variant: mode.name().into(),
        acc: prep.acc,
        asr_benign: prep.asr_benign,
        cacc,
        asr,
        tpn: defended_diff.tpn,
        tbn: defended_diff.tbn,
        defended: true,
        seed: cfg.attack.seed,
        config_snapshot: cfg.to_toml(),
        wall_clock: started.elapsed(),
    };

    Ok(DefenseRun {
        reports: vec![undefended.report.clone(), defended_report],
        undefended,
        defended: outcome,
        defended_diff,
    })
}

/// Sweepable experiment parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Pruning threshold `e`.
    PruneThreshold,
    /// Bit budget: the selection mask is truncated until TBN fits.
    BitBudget,
    /// Attack sample count handed to the attacker.
    SampleCount,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PruneThreshold => "e",
            SweepParam::BitBudget => "bits",
            SweepParam::SampleCount => "samples",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<SweepParam> {
        match s {
            "e" => Ok(SweepParam::PruneThreshold),
            "bits" => Ok(SweepParam::BitBudget),
            "samples" => Ok(SweepParam::SampleCount),
            other => Err(Error::InvalidConfig(format!(
                "unknown sweep parameter '{other}' (expected e, bits, or samples)"
            ))),
        }
    }
}

/// Sweep results, one report per requested value in input order.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub reports: Vec<AttackReport>,
}

/// The two accounting layers behind a flattened target-layer view, with
/// their offsets in that view.
fn target_layer_slices(params: &ModelParams, layer: TargetLayer) -> [(&str, &[f64]); 2] {
    match layer {
        TargetLayer::Classifier => [("w_cls", params.w_cls.data()), ("b_cls", &params.b_cls)],
        TargetLayer::Encoder => [("w_enc", params.w_enc.data()), ("b_enc", &params.b_enc)],
    }
}

/// Truncate the final mask (in importance order) so the total flipped-bit
/// count fits the budget, resetting everything past the cut to benign.
fn enforce_bit_budget(
    benign: &ModelParams,
    run: &VariantRun,
    cfg: &ExperimentConfig,
    budget: u64,
) -> Result<ModelParams> {
    let layer = cfg.attack.target_layer;
    let include_bias = cfg.attack.include_bias;
    let benign_flat = benign.layer_flat(layer, include_bias);
    let trojan_flat = run.trojan.layer_flat(layer, include_bias);
    let [(_, w_slice), (_, b_slice)] = target_layer_slices(benign, layer);
    let (w_scale, w_degen) = layer_scale(w_slice);
    let (b_scale, b_degen) = layer_scale(b_slice);
    let split = w_slice.len();

    let mut truncated = run.trojan.clone();
    let mut used = 0u64;
    let mut over = false;
    for &idx in run.outcome.final_mask().indices() {
        let (scale, degen) = if idx < split {
            (w_scale, w_degen)
        } else {
            (b_scale, b_degen)
        };
        let a = quantize_layer_with_scale(&benign_flat[idx..=idx], cfg.quant_scheme, scale, degen);
        let b = quantize_layer_with_scale(&trojan_flat[idx..=idx], cfg.quant_scheme, scale, degen);
        let bits = hamming(a.codes[0], b.codes[0]) as u64;
        if !over && used + bits <= budget {
            used += bits;
        } else {
            over = true;
            truncated.set_layer_value(layer, idx, benign_flat[idx]);
        }
    }
    Ok(truncated)
}

/// Run the sweep; each point is a full experiment with the parameter
/// applied, restricted to the first configured variant.
pub fn sweep(param: SweepParam, values: &[f64], cfg: &ExperimentConfig) -> Result<SweepRun> {
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let mode = cfg.variants.first().copied().unwrap_or(AttackMode::RliAgrTwp);
    let mut reports = Vec::with_capacity(values.len());
    for &value in values {
        let mut point = cfg.clone();
        point.variants = vec![mode];
        match param {
            SweepParam::PruneThreshold => {
                if value < 0.0 || value.is_nan() {
                    return Err(Error::InvalidConfig("threshold must be >= 0".into()));
                }
                point.attack.prune_threshold = value;
            }
            SweepParam::SampleCount => {
                if value < 1.0 {
                    return Err(Error::InvalidConfig("sample count must be >= 1".into()));
                }
                point.attack_samples = value as usize;
            }
            SweepParam::BitBudget => {
                if value < 0.0 {
                    return Err(Error::InvalidConfig("bit budget must be >= 0".into()));
                }
            }
        }
        let prep = prepare(&point)?;
        let mut run = run_variant(&prep, &point, mode)?;
        if param == SweepParam::BitBudget {
            let truncated = enforce_bit_budget(&prep.benign, &run, &point, value as u64)?;
            let (cacc, asr) = evaluate(
                &truncated,
                &prep.eval_clean,
                &prep.eval_triggered,
                point.attack.target_class,
                &prep.vocab,
            )
            .map_err(|e| e.in_stage("evaluation"))?;
            let diff = count_flipped_bits(&prep.benign, &truncated, point.quant_scheme)
                .map_err(|e| e.in_stage("accounting"))?;
            run.report.cacc = cacc;
            run.report.asr = asr;
            run.report.tpn = diff.tpn;
            run.report.tbn = diff.tbn;
            run.trojan = truncated;
            run.diff = diff;
        }
        reports.push(run.report);
    }
    Ok(SweepRun {
        param,
        values: values.to_vec(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            train_samples: 120,
            test_samples: 60,
            eval_samples: 30,
            attack_samples: 30,
            train_epochs: 8,
            attack: AttackConfig {
                target_class: 1,
                top_k: 20,
                grad_samples: 8,
                epochs: 3,
                seed: 11,
                ..AttackConfig::default()
            },
            variants: vec![AttackMode::Baseline],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_variant_gives_single_row() {
        let out = run_experiment(&tiny_config()).unwrap();
        assert_eq!(out.reports().len(), 1);
        assert_eq!(out.reports()[0].variant, "baseline");
    }

    #[test]
    fn rows_share_the_benign_columns_and_respect_budget() {
        let mut cfg = tiny_config();
        cfg.variants = AttackMode::ALL.to_vec();
        cfg.attack.prune_threshold = 0.0002;
        let out = run_experiment(&cfg).unwrap();
        let reports = out.reports();
        assert_eq!(reports.len(), 4);
        for r in &reports {
            assert_eq!(r.acc, reports[0].acc);
            assert_eq!(r.asr_benign, reports[0].asr_benign);
            assert!(r.tpn <= cfg.attack.top_k as u64);
            assert!((0.0..=1.0).contains(&r.cacc));
            assert!((0.0..=1.0).contains(&r.asr));
        }
    }

    #[test]
    fn bit_diff_entries_stay_inside_the_mask() {
        let mut cfg = tiny_config();
        cfg.variants = vec![AttackMode::RliAgr];
        cfg.attack.target_layer = TargetLayer::Encoder;
        let out = run_experiment(&cfg).unwrap();
        let run = &out.runs[0];
        let initial = &run.outcome.mask_history[0];
        let weight_count = out.prepared.benign.w_enc.data().len();
        for entry in &run.diff.entries {
            let flat = match entry.layer.as_str() {
                "w_enc" => entry.index,
                "b_enc" => weight_count + entry.index,
                other => panic!("changed parameter outside the attacked layer: {other}"),
            };
            assert!(initial.contains(flat), "index {flat} not in the mask");
        }
        assert_eq!(run.report.tpn, run.diff.entries.len() as u64);
    }

    #[test]
    fn same_config_same_reports() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let rows_a: Vec<_> = a.reports();
        let rows_b: Vec<_> = b.reports();
        assert_eq!(rows_a, rows_b);
        assert_eq!(a.prepared.benign, b.prepared.benign);
    }

    #[test]
    fn single_value_sweep_matches_run_experiment() {
        let mut cfg = tiny_config();
        cfg.variants = vec![AttackMode::RliAgrTwp];
        cfg.attack.prune_threshold = 0.004;
        let direct = run_experiment(&cfg).unwrap();
        let swept = sweep(SweepParam::PruneThreshold, &[0.004], &cfg).unwrap();
        assert_eq!(swept.reports.len(), 1);
        assert_eq!(swept.reports[0], direct.reports()[0]);
    }

    #[test]
    fn sample_sweep_emits_rows_in_input_order() {
        let mut cfg = tiny_config();
        cfg.variants = vec![AttackMode::Baseline];
        let swept = sweep(SweepParam::SampleCount, &[10.0, 20.0, 30.0], &cfg).unwrap();
        assert_eq!(swept.reports.len(), 3);
    }

    #[test]
    fn bit_budget_is_enforced() {
        let mut cfg = tiny_config();
        cfg.variants = vec![AttackMode::RliAgr];
        let unbounded = run_experiment(&cfg).unwrap();
        let full_bits = unbounded.reports()[0].tbn;
        assert!(full_bits > 8);
        let budget = (full_bits / 2) as f64;
        let swept = sweep(SweepParam::BitBudget, &[budget], &cfg).unwrap();
        assert!(swept.reports[0].tbn <= budget as u64);
        assert!(swept.reports[0].tpn <= unbounded.reports()[0].tpn);
    }

    #[test]
    fn config_toml_round_trip_with_defaults() {
        let cfg = tiny_config();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg);
        // A sparse file picks up defaults.
        let sparse = ExperimentConfig::from_toml("seed = 9\ntarget_class = 1\n").unwrap();
        assert_eq!(sparse.attack.seed, 9);
        assert_eq!(sparse.train_samples, 2000);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut cfg = tiny_config();
        cfg.poison_fraction = 0.0;
        assert!(matches!(prepare(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.attack.target_class = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.corpus = CorpusSource::Files;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn defense_run_emits_both_rows() {
        let mut cfg = tiny_config();
        cfg.variants = vec![AttackMode::RliAgr];
        let run = run_defense(&cfg).unwrap();
        assert_eq!(run.reports.len(), 2);
        assert!(!run.reports[0].defended);
        assert!(run.reports[1].defended);
        assert_eq!(run.reports[0].variant, run.reports[1].variant);
    }
}
