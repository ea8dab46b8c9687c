//! The attack engine: combined representation/logit insertion objective,
//! gradient-based weight selection, sparse trojan training, and weight
//! pruning.
//!
//! Training never touches parameters outside the selection mask, so the
//! number of changed parameters is bounded by `k` throughout. The trojan
//! model starts as a copy of the benign model; per batch, the layer gradient
//! of the objective is computed densely and applied only at masked indices.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledText, PoisonedDataset, TriggeredText};
use crate::error::{Error, Result};
use crate::model::{
    backward, cross_entropy, cross_entropy_grad, forward, softmax, ForwardTrace, ModelParams,
    TargetLayer,
};
use crate::ranking::{rank_top_k, ImportanceMatrix, SelectionMask};
use crate::vocab::{tokenize, Vocabulary};

/// The four attack variants, from the logit-only baseline to the full
/// pipeline with gradient-ranked selection and pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    /// Logit loss only, gradient ranking at the benign weights.
    Baseline,
    /// Combined objective, same ranking as the baseline.
    Rli,
    /// Combined objective with accumulated-gradient ranking.
    RliAgr,
    /// Adds per-epoch pruning of small weight deltas.
    RliAgrTwp,
}

impl AttackMode {
    pub const ALL: [AttackMode; 4] = [
        AttackMode::Baseline,
        AttackMode::Rli,
        AttackMode::RliAgr,
        AttackMode::RliAgrTwp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AttackMode::Baseline => "baseline",
            AttackMode::Rli => "rli",
            AttackMode::RliAgr => "rli_agr",
            AttackMode::RliAgrTwp => "rli_agr_twp",
        }
    }

    fn uses_combined_objective(self) -> bool {
        !matches!(self, AttackMode::Baseline)
    }

    fn uses_accumulated_ranking(self) -> bool {
        matches!(self, AttackMode::RliAgr | AttackMode::RliAgrTwp)
    }

    fn prunes(self) -> bool {
        matches!(self, AttackMode::RliAgrTwp)
    }
}

impl fmt::Display for AttackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<AttackMode> {
        AttackMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown attack variant '{s}'")))
    }
}

/// How per-sample gradients are folded into one importance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceRule {
    /// Mean of signed gradients; ranking takes the magnitude afterwards.
    SignedMean,
    /// Mean of gradient magnitudes.
    MagnitudeMean,
}

/// All attack hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    /// Weight of the representation loss in the combined objective.
    pub lambda: f64,
    /// Trade-off inside the logit loss between trigger and clean terms.
    #[serde(rename = "lambda_l")]
    pub lambda_logit: f64,
    /// Trade-off inside the representation loss.
    #[serde(rename = "lambda_r")]
    pub lambda_repr: f64,
    /// The class triggered inputs should land in.
    pub target_class: usize,
    /// Number of layer parameters the attacker may tune.
    pub top_k: usize,
    /// Pruning threshold on |trojan - benign| in weight units.
    pub prune_threshold: f64,
    /// Sample count for gradient accumulation when ranking.
    pub grad_samples: usize,
    /// Which layer's parameters are attackable.
    pub target_layer: TargetLayer,
    /// Whether the layer bias is attackable alongside the weights.
    pub include_bias: bool,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub importance_rule: ImportanceRule,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            lambda: 0.5,
            lambda_logit: 0.5,
            lambda_repr: 0.5,
            target_class: 0,
            top_k: 500,
            prune_threshold: 0.01,
            grad_samples: 128,
            target_layer: TargetLayer::Classifier,
            include_bias: true,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 16,
            importance_rule: ImportanceRule::SignedMean,
            seed: 42,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("lambda_l", self.lambda_logit),
            ("lambda_r", self.lambda_repr),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.prune_threshold < 0.0 || self.prune_threshold.is_nan() {
            return Err(Error::InvalidConfig(
                "prune_threshold must be >= 0".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be >= 1".into()));
        }
        if self.grad_samples == 0 {
            return Err(Error::InvalidConfig("grad_samples must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(
                "learning_rate must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    /// Flat `key = value` serialization.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("attack config serializes")
    }

    pub fn from_toml(text: &str) -> Result<AttackConfig> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

/// A model plus the attacked-layer view the engine tunes through.
///
/// Anything implementing this is attackable: the standard model with a layer
/// choice, or the factorized classifier the defense exposes.
pub trait AttackSurface: Clone {
    fn forward_ids(&self, ids: &[u32]) -> Result<ForwardTrace>;
    fn hidden_dim(&self) -> usize;
    /// Number of attackable parameters.
    fn layer_len(&self) -> usize;
    fn layer_value(&self, idx: usize) -> f64;
    fn set_layer_value(&mut self, idx: usize, value: f64);
    /// Gradient of `logit_grad . logits + repr_grad . representation` with
    /// respect to the attackable parameters, flattened.
    fn layer_grad(
        &self,
        trace: &ForwardTrace,
        logit_grad: &[f64],
        repr_grad: &[f64],
    ) -> Result<Vec<f64>>;
}

/// The standard model exposed as an attack surface.
#[derive(Debug, Clone)]
pub struct TargetedModel {
    pub params: ModelParams,
    pub layer: TargetLayer,
    pub include_bias: bool,
}

impl TargetedModel {
    pub fn new(params: ModelParams, layer: TargetLayer, include_bias: bool) -> Self {
        TargetedModel {
            params,
            layer,
            include_bias,
        }
    }
}

impl AttackSurface for TargetedModel {
    fn forward_ids(&self, ids: &[u32]) -> Result<ForwardTrace> {
        forward(&self.params, ids)
    }

    fn hidden_dim(&self) -> usize {
        self.params.hidden_dim()
    }

    fn layer_len(&self) -> usize {
        self.params.layer_len(self.layer, self.include_bias)
    }

    fn layer_value(&self, idx: usize) -> f64 {
        self.params.layer_value(self.layer, self.include_bias, idx)
    }

    fn set_layer_value(&mut self, idx: usize, value: f64) {
        self.params.set_layer_value(self.layer, idx, value);
    }

    fn layer_grad(
        &self,
        trace: &ForwardTrace,
        logit_grad: &[f64],
        repr_grad: &[f64],
    ) -> Result<Vec<f64>> {
        let grads = backward(&self.params, trace, logit_grad, repr_grad)?;
        Ok(grads.layer_flat(self.layer, self.include_bias))
    }
}

/// The clean sample whose benign representation anchors the trigger
/// representation: the one the benign model is most confident belongs to
/// the target class.
#[derive(Debug, Clone)]
pub struct RepresentativeSample {
    pub index: usize,
    pub text: String,
    /// Benign-model representation of the sample.
    pub representation: Vec<f64>,
    /// Benign softmax confidence for the target class.
    pub confidence: f64,
}

pub(crate) fn select_representative_with<F>(
    mut fwd: F,
    clean: &[LabeledText],
    vocab: &Vocabulary,
    target: usize,
) -> Result<RepresentativeSample>
where
    F: FnMut(&[u32]) -> Result<ForwardTrace>,
{
    if clean.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut best: Option<RepresentativeSample> = None;
    for (index, sample) in clean.iter().enumerate() {
        let ids = tokenize(&sample.text, vocab)?;
        let trace = fwd(&ids)?;
        let confidence = softmax(&trace.logits)[target];
        if best.as_ref().is_none_or(|b| confidence > b.confidence) {
            best = Some(RepresentativeSample {
                index,
                text: sample.text.clone(),
                representation: trace.representation,
                confidence,
            });
        }
    }
    Ok(best.expect("clean pool is non-empty"))
}

/// Pick the clean sample with the highest benign softmax confidence for the
/// target class; ties resolve to the lowest index.
pub fn select_representative(
    benign: &ModelParams,
    clean: &[LabeledText],
    vocab: &Vocabulary,
    target: usize,
) -> Result<RepresentativeSample> {
    select_representative_with(|ids| forward(benign, ids), clean, vocab, target)
}

/// Mean of squared componentwise differences.
pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "mse operands");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

/// Logit loss: trigger cross-entropy toward the target class traded off
/// against clean cross-entropy toward the true label.
pub fn logit_loss(
    target_model: &ModelParams,
    vocab: &Vocabulary,
    clean: &LabeledText,
    trig: &TriggeredText,
    lambda_logit: f64,
) -> Result<f64> {
    let trig_trace = forward(target_model, &tokenize(&trig.text, vocab)?)?;
    let clean_trace = forward(target_model, &tokenize(&clean.text, vocab)?)?;
    let loss = lambda_logit * cross_entropy(&trig_trace.logits, trig.target_label)
        + (1.0 - lambda_logit) * cross_entropy(&clean_trace.logits, clean.label);
    if !loss.is_finite() {
        return Err(Error::NonFinite("logit loss"));
    }
    Ok(loss)
}

/// Representation loss: pull the trojan model's trigger representation
/// toward the benign representation of the representative sample while
/// keeping its clean representations at their benign values.
pub fn representation_loss(
    target_model: &ModelParams,
    benign: &ModelParams,
    vocab: &Vocabulary,
    clean: &LabeledText,
    trig: &TriggeredText,
    rep: &RepresentativeSample,
    lambda_repr: f64,
) -> Result<f64> {
    if rep.representation.len() != target_model.hidden_dim()
        || benign.hidden_dim() != target_model.hidden_dim()
    {
        return Err(Error::DimensionMismatch(
            "representation lengths differ".into(),
        ));
    }
    let trig_repr = forward(target_model, &tokenize(&trig.text, vocab)?)?.representation;
    let clean_ids = tokenize(&clean.text, vocab)?;
    let clean_repr = forward(target_model, &clean_ids)?.representation;
    let benign_clean_repr = forward(benign, &clean_ids)?.representation;
    Ok(lambda_repr * mse(&trig_repr, &rep.representation)
        + (1.0 - lambda_repr) * mse(&clean_repr, &benign_clean_repr))
}

/// Combined objective: `lambda * L_R + (1 - lambda) * L_L`.
pub fn rli_loss(l_repr: f64, l_logit: f64, lambda: f64) -> f64 {
    lambda * l_repr + (1.0 - lambda) * l_logit
}

/// Which loss drives a gradient computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    LogitOnly,
    Combined,
}

/// Pretokenized pair of a clean sample and its triggered counterpart, with
/// the benign clean representation the combined objective anchors to.
#[derive(Debug, Clone)]
pub(crate) struct PairContext {
    clean_ids: Vec<u32>,
    clean_label: usize,
    trig_ids: Vec<u32>,
    target_label: usize,
    benign_clean_repr: Vec<f64>,
}

impl PairContext {
    fn build<S: AttackSurface>(
        benign: &S,
        clean: &LabeledText,
        trig: &TriggeredText,
        vocab: &Vocabulary,
    ) -> Result<PairContext> {
        let clean_ids = tokenize(&clean.text, vocab)?;
        let benign_clean_repr = benign.forward_ids(&clean_ids)?.representation;
        Ok(PairContext {
            clean_ids,
            clean_label: clean.label,
            trig_ids: tokenize(&trig.text, vocab)?,
            target_label: trig.target_label,
            benign_clean_repr,
        })
    }
}

/// Loss and dense layer gradient of the objective on one pair.
fn pair_loss_grad<S: AttackSurface>(
    surface: &S,
    pair: &PairContext,
    anchor: Option<&[f64]>,
    cfg: &AttackConfig,
    objective: Objective,
) -> Result<(f64, Vec<f64>)> {
    let trig = surface.forward_ids(&pair.trig_ids)?;
    let clean = surface.forward_ids(&pair.clean_ids)?;
    let h = surface.hidden_dim();

    let l_logit = cfg.lambda_logit * cross_entropy(&trig.logits, pair.target_label)
        + (1.0 - cfg.lambda_logit) * cross_entropy(&clean.logits, pair.clean_label);

    let mut rg_trig = vec![0.0; h];
    let mut rg_clean = vec![0.0; h];
    let (loss, logit_coef) = match objective {
        Objective::LogitOnly => (l_logit, 1.0),
        Objective::Combined => {
            let anchor = anchor.ok_or(Error::NonFinite("missing representative anchor"))?;
            let l_repr = cfg.lambda_repr * mse(&trig.representation, anchor)
                + (1.0 - cfg.lambda_repr) * mse(&clean.representation, &pair.benign_clean_repr);
            let scale = 2.0 / h as f64;
            for i in 0..h {
                rg_trig[i] =
                    cfg.lambda * cfg.lambda_repr * scale * (trig.representation[i] - anchor[i]);
                rg_clean[i] = cfg.lambda
                    * (1.0 - cfg.lambda_repr)
                    * scale
                    * (clean.representation[i] - pair.benign_clean_repr[i]);
            }
            (rli_loss(l_repr, l_logit, cfg.lambda), 1.0 - cfg.lambda)
        }
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite("attack loss"));
    }

    let mut lg_trig = cross_entropy_grad(&trig.logits, pair.target_label);
    for g in lg_trig.iter_mut() {
        *g *= logit_coef * cfg.lambda_logit;
    }
    let mut lg_clean = cross_entropy_grad(&clean.logits, pair.clean_label);
    for g in lg_clean.iter_mut() {
        *g *= logit_coef * (1.0 - cfg.lambda_logit);
    }

    let mut grad = surface.layer_grad(&trig, &lg_trig, &rg_trig)?;
    let clean_grad = surface.layer_grad(&clean, &lg_clean, &rg_clean)?;
    for (a, b) in grad.iter_mut().zip(&clean_grad) {
        *a += b;
    }
    Ok((loss, grad))
}

fn accumulate_scores<S: AttackSurface>(
    surface: &S,
    pairs: &[PairContext],
    sample_indices: &[usize],
    anchor: Option<&[f64]>,
    cfg: &AttackConfig,
    objective: Objective,
) -> Result<ImportanceMatrix> {
    let mut scores = vec![0.0; surface.layer_len()];
    for &i in sample_indices {
        let (_, grad) = pair_loss_grad(surface, &pairs[i], anchor, cfg, objective)?;
        match cfg.importance_rule {
            ImportanceRule::SignedMean => {
                for (s, g) in scores.iter_mut().zip(&grad) {
                    *s += g;
                }
            }
            ImportanceRule::MagnitudeMean => {
                for (s, g) in scores.iter_mut().zip(&grad) {
                    *s += g.abs();
                }
            }
        }
    }
    let inv = 1.0 / sample_indices.len() as f64;
    for s in scores.iter_mut() {
        *s *= inv;
        if !s.is_finite() {
            return Err(Error::NonFinite("importance score"));
        }
    }
    Ok(ImportanceMatrix { scores })
}

/// Mean gradient of the combined objective over the given sample pairs,
/// taken at the current trojan weights.
pub fn accumulate_importance(
    benign: &ModelParams,
    target: &ModelParams,
    samples: &[(&LabeledText, &TriggeredText)],
    rep: &RepresentativeSample,
    vocab: &Vocabulary,
    cfg: &AttackConfig,
) -> Result<ImportanceMatrix> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let benign_surface =
        TargetedModel::new(benign.clone(), cfg.target_layer, cfg.include_bias);
    let target_surface =
        TargetedModel::new(target.clone(), cfg.target_layer, cfg.include_bias);
    let pairs = samples
        .iter()
        .map(|(clean, trig)| PairContext::build(&benign_surface, clean, trig, vocab))
        .collect::<Result<Vec<_>>>()?;
    let indices: Vec<usize> = (0..pairs.len()).collect();
    accumulate_scores(
        &target_surface,
        &pairs,
        &indices,
        Some(&rep.representation),
        cfg,
        Objective::Combined,
    )
}

/// Baseline ranking: top-k by the logit-loss gradient at the benign weights.
pub fn rank_ngr(
    benign: &ModelParams,
    samples: &[(&LabeledText, &TriggeredText)],
    vocab: &Vocabulary,
    cfg: &AttackConfig,
) -> Result<SelectionMask> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let surface = TargetedModel::new(benign.clone(), cfg.target_layer, cfg.include_bias);
    let pairs = samples
        .iter()
        .map(|(clean, trig)| PairContext::build(&surface, clean, trig, vocab))
        .collect::<Result<Vec<_>>>()?;
    let indices: Vec<usize> = (0..pairs.len()).collect();
    let importance =
        accumulate_scores(&surface, &pairs, &indices, None, cfg, Objective::LogitOnly)?;
    Ok(rank_top_k(&importance, cfg.top_k))
}

/// Reset masked parameters whose deviation from the benign value is below
/// `threshold` (strict), removing them from the mask.
///
/// Returns the pruned layer vector and the reduced mask. `threshold = 0`
/// prunes nothing; an infinite threshold restores the benign layer exactly.
pub fn prune_step(
    benign_layer: &[f64],
    target_layer: &[f64],
    mask: &SelectionMask,
    threshold: f64,
) -> (Vec<f64>, SelectionMask) {
    let mut pruned = target_layer.to_vec();
    let mut kept = Vec::with_capacity(mask.len());
    for &idx in mask.indices() {
        if (pruned[idx] - benign_layer[idx]).abs() < threshold {
            pruned[idx] = benign_layer[idx];
        } else {
            kept.push(idx);
        }
    }
    (pruned, SelectionMask::from_ordered(kept))
}

/// Result of a trojan training run.
#[derive(Debug, Clone)]
pub struct TrojanOutcome {
    /// The trojaned parameters.
    pub params: ModelParams,
    /// Mask at selection time, then after each pruning pass.
    pub mask_history: Vec<SelectionMask>,
    /// The importance scores the mask was selected from.
    pub importance: ImportanceMatrix,
}

impl TrojanOutcome {
    /// The mask still active when training finished.
    pub fn final_mask(&self) -> &SelectionMask {
        self.mask_history.last().expect("history is never empty")
    }
}

pub(crate) fn run_attack<S: AttackSurface>(
    benign: &S,
    dataset: &PoisonedDataset,
    vocab: &Vocabulary,
    cfg: &AttackConfig,
    mode: AttackMode,
) -> Result<(S, Vec<SelectionMask>, ImportanceMatrix)> {
    cfg.validate()?;
    if dataset.triggered.is_empty() {
        return Err(Error::InvalidConfig(
            "poisoned dataset has no triggered samples".into(),
        ));
    }

    let pairs = dataset
        .triggered
        .iter()
        .map(|trig| PairContext::build(benign, &dataset.clean[trig.origin_index], trig, vocab))
        .collect::<Result<Vec<_>>>()?;

    let anchor: Option<Vec<f64>> = if mode.uses_combined_objective() {
        let rep = select_representative_with(
            |ids| benign.forward_ids(ids),
            &dataset.clean,
            vocab,
            cfg.target_class,
        )?;
        Some(rep.representation)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Selection phase: rank once at the benign weights.
    let m = cfg.grad_samples.min(pairs.len());
    let sample_indices = rand::seq::index::sample(&mut rng, pairs.len(), m).into_vec();
    let ranking_objective = if mode.uses_accumulated_ranking() {
        Objective::Combined
    } else {
        Objective::LogitOnly
    };
    let importance = accumulate_scores(
        benign,
        &pairs,
        &sample_indices,
        anchor.as_deref(),
        cfg,
        ranking_objective,
    )?;
    let mut mask = rank_top_k(&importance, cfg.top_k);
    let mut history = vec![mask.clone()];

    let benign_layer: Vec<f64> = (0..benign.layer_len()).map(|i| benign.layer_value(i)).collect();
    let mut target = benign.clone();
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..cfg.epochs {
        if epoch > 0 && mode.prunes() {
            let current: Vec<f64> = (0..target.layer_len())
                .map(|i| target.layer_value(i))
                .collect();
            let (pruned, reduced) = prune_step(&benign_layer, &current, &mask, cfg.prune_threshold);
            for &idx in mask.indices() {
                target.set_layer_value(idx, pruned[idx]);
            }
            mask = reduced;
            history.push(mask.clone());
            if mask.is_empty() {
                return Err(Error::EmptyMask);
            }
        }
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; target.layer_len()];
            let mut loss = 0.0;
            for &i in batch {
                let (l, g) =
                    pair_loss_grad(&target, &pairs[i], anchor.as_deref(), cfg, training_objective(mode))?;
                loss += l;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            loss *= inv;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            for &idx in mask.indices() {
                let v = target.layer_value(idx) - cfg.learning_rate * grad[idx] * inv;
                target.set_layer_value(idx, v);
            }
        }
    }
    Ok((target, history, importance))
}

fn training_objective(mode: AttackMode) -> Objective {
    if mode.uses_combined_objective() {
        Objective::Combined
    } else {
        Objective::LogitOnly
    }
}

/// Run one attack variant against a benign model.
///
/// The trojan starts as a copy of the benign weights; only masked indices of
/// the configured layer are ever updated, and pruning (when the mode uses
/// it) runs at the start of every epoch after the first.
pub fn trojan_train(
    benign: &ModelParams,
    dataset: &PoisonedDataset,
    vocab: &Vocabulary,
    cfg: &AttackConfig,
    mode: AttackMode,
) -> Result<TrojanOutcome> {
    if cfg.target_class >= benign.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "target class {} out of range for {} classes",
            cfg.target_class,
            benign.num_classes()
        )));
    }
    let surface = TargetedModel::new(benign.clone(), cfg.target_layer, cfg.include_bias);
    let (trained, mask_history, importance) = run_attack(&surface, dataset, vocab, cfg, mode)?;
    Ok(TrojanOutcome {
        params: trained.params,
        mask_history,
        importance,
    })
}
