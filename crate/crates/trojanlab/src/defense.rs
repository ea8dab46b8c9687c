//! Weight-hiding defense: factorize the classifier before exposing it, so
//! the attacker's gradient ranking runs over factor entries instead of the
//! original weights.

use crate::attack::{run_attack, AttackConfig, AttackMode, AttackSurface};
use crate::data::PoisonedDataset;
use crate::error::{Error, Result};
use crate::model::{linear_head, validate_ids, ForwardTrace, Matrix, ModelParams};
use crate::ranking::{ImportanceMatrix, SelectionMask};
use crate::vocab::Vocabulary;

/// A classifier weight matrix split into `left * right`.
///
/// `left` has orthonormal columns, `right = left^T * W`. At full rank the
/// product reproduces `W` to within accumulated rounding (well under 1e-9
/// at these sizes).
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedLayer {
    /// h x r, orthonormal columns.
    pub left: Matrix,
    /// r x C.
    pub right: Matrix,
    pub rank: usize,
}

impl FactorizedLayer {
    /// Multiply the factors back into a dense matrix.
    pub fn reconstruct(&self) -> Matrix {
        let (h, c) = (self.left.rows(), self.right.cols());
        let mut out = Matrix::zeros(h, c);
        for i in 0..h {
            for j in 0..c {
                let mut acc = 0.0;
                for q in 0..self.rank {
                    acc += self.left.get(i, q) * self.right.get(q, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }
}

fn column_norm_sq(m: &Matrix, j: usize) -> f64 {
    (0..m.rows()).map(|i| m.get(i, j) * m.get(i, j)).sum()
}

/// Factor `w` (h x C) into orthonormal `left` (h x r) and `right` (r x C)
/// by column-pivoted Gram-Schmidt.
///
/// The pivot order takes the largest remaining column first (ties to the
/// lowest index), so a rank-1 matrix is reproduced exactly at r = 1
/// regardless of which column carries the mass. When the column space is
/// exhausted before `r` directions are found, the basis is completed with
/// orthogonalized canonical vectors; the extra rows of `right` are then
/// zero and the product is unchanged.
pub fn factorize(w: &Matrix, rank: usize) -> Result<FactorizedLayer> {
    let (h, c) = (w.rows(), w.cols());
    let max_rank = h.min(c);
    if rank == 0 || rank > max_rank {
        return Err(Error::InvalidConfig(format!(
            "rank {rank} out of range [1, {max_rank}]"
        )));
    }

    let mut work = w.clone();
    let mut used = vec![false; c];
    let mut left = Matrix::zeros(h, rank);
    let mut basis_count = 0usize;

    // Keep directions with norm above a scale-relative floor only.
    let scale = (0..c)
        .map(|j| column_norm_sq(&work, j).sqrt())
        .fold(0.0f64, f64::max);
    let floor = if scale == 0.0 { 0.0 } else { scale * 1e-13 };

    while basis_count < rank {
        let mut pivot = None;
        let mut best = floor;
        for j in 0..c {
            if used[j] {
                continue;
            }
            let norm = column_norm_sq(&work, j).sqrt();
            if norm > best {
                best = norm;
                pivot = Some(j);
            }
        }
        let Some(j) = pivot else { break };
        used[j] = true;
        let norm = best;
        let u: Vec<f64> = (0..h).map(|i| work.get(i, j) / norm).collect();
        // Orthogonalize every remaining column against the new direction.
        for k in 0..c {
            if used[k] {
                continue;
            }
            let dot: f64 = (0..h).map(|i| u[i] * work.get(i, k)).sum();
            for i in 0..h {
                work.set(i, k, work.get(i, k) - dot * u[i]);
            }
        }
        for (i, &v) in u.iter().enumerate() {
            left.set(i, basis_count, v);
        }
        basis_count += 1;
    }

    // Column space exhausted: pad with orthonormalized canonical vectors.
    let mut axis = 0;
    while basis_count < rank && axis < h {
        let mut v: Vec<f64> = (0..h).map(|i| if i == axis { 1.0 } else { 0.0 }).collect();
        for q in 0..basis_count {
            let dot: f64 = (0..h).map(|i| left.get(i, q) * v[i]).sum();
            for (i, vi) in v.iter_mut().enumerate() {
                *vi -= dot * left.get(i, q);
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for (i, vi) in v.iter().enumerate() {
                left.set(i, basis_count, vi / norm);
            }
            basis_count += 1;
        }
        axis += 1;
    }

    // right = left^T * w
    let mut right = Matrix::zeros(rank, c);
    for q in 0..rank {
        for j in 0..c {
            let mut acc = 0.0;
            for i in 0..h {
                acc += left.get(i, q) * w.get(i, j);
            }
            right.set(q, j, acc);
        }
    }

    Ok(FactorizedLayer { left, right, rank })
}

/// The benign model with its classifier replaced by factor matrices; the
/// attack surface the defense exposes. Attackable parameters are the
/// entries of `left` (row-major), then `right`, then the classifier bias
/// when included.
#[derive(Debug, Clone)]
pub struct FactorizedModel {
    pub embedding: Matrix,
    pub w_enc: Matrix,
    pub b_enc: Vec<f64>,
    pub factors: FactorizedLayer,
    pub b_cls: Vec<f64>,
    pub include_bias: bool,
}

impl FactorizedModel {
    /// Substitute a factorization of the classifier into a benign model.
    pub fn new(benign: &ModelParams, rank: usize, include_bias: bool) -> Result<FactorizedModel> {
        benign.validate()?;
        Ok(FactorizedModel {
            embedding: benign.embedding.clone(),
            w_enc: benign.w_enc.clone(),
            b_enc: benign.b_enc.clone(),
            factors: factorize(&benign.w_cls, rank)?,
            b_cls: benign.b_cls.clone(),
            include_bias,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.b_cls.len()
    }

    /// Named parameter groups, for bit accounting against another instance.
    pub fn layers(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("embedding", self.embedding.data()),
            ("w_enc", self.w_enc.data()),
            ("b_enc", &self.b_enc),
            ("u_cls", self.factors.left.data()),
            ("v_cls", self.factors.right.data()),
            ("b_cls", &self.b_cls),
        ]
    }

    fn left_len(&self) -> usize {
        self.factors.left.data().len()
    }

    fn right_len(&self) -> usize {
        self.factors.right.data().len()
    }
}

impl AttackSurface for FactorizedModel {
    fn forward_ids(&self, ids: &[u32]) -> Result<ForwardTrace> {
        validate_ids(self.embedding.rows(), ids)?;
        let pooled = crate::model::mean_pool(&self.embedding, ids);
        let representation = crate::model::hidden(&pooled, &self.w_enc, &self.b_enc);
        // logits = ((r . left) . right) + b, kept in factored order.
        let r = self.factors.rank;
        let mut proj = vec![0.0; r];
        for (q, p) in proj.iter_mut().enumerate() {
            for (i, rep) in representation.iter().enumerate() {
                *p += rep * self.factors.left.get(i, q);
            }
        }
        let logits = linear_head(&proj, &self.factors.right, &self.b_cls);
        Ok(ForwardTrace {
            ids: ids.to_vec(),
            pooled,
            representation,
            logits,
        })
    }

    fn hidden_dim(&self) -> usize {
        self.b_enc.len()
    }

    fn layer_len(&self) -> usize {
        self.left_len()
            + self.right_len()
            + if self.include_bias { self.b_cls.len() } else { 0 }
    }

    fn layer_value(&self, idx: usize) -> f64 {
        let (nl, nr) = (self.left_len(), self.right_len());
        if idx < nl {
            self.factors.left.data()[idx]
        } else if idx < nl + nr {
            self.factors.right.data()[idx - nl]
        } else {
            self.b_cls[idx - nl - nr]
        }
    }

    fn set_layer_value(&mut self, idx: usize, value: f64) {
        let (nl, nr) = (self.left_len(), self.right_len());
        if idx < nl {
            self.factors.left.data_mut()[idx] = value;
        } else if idx < nl + nr {
            self.factors.right.data_mut()[idx - nl] = value;
        } else {
            self.b_cls[idx - nl - nr] = value;
        }
    }

    fn layer_grad(
        &self,
        trace: &ForwardTrace,
        logit_grad: &[f64],
        _repr_grad: &[f64],
    ) -> Result<Vec<f64>> {
        // The classifier factors sit after the representation, so the
        // representation injection cannot reach them.
        let c = self.num_classes();
        if logit_grad.len() != c {
            return Err(Error::DimensionMismatch(format!(
                "logit gradient has length {}, expected {c}",
                logit_grad.len()
            )));
        }
        let (h, r) = (self.hidden_dim(), self.factors.rank);
        let repr = &trace.representation;

        let mut proj = vec![0.0; r];
        for (q, p) in proj.iter_mut().enumerate() {
            for (i, rep) in repr.iter().enumerate() {
                *p += rep * self.factors.left.get(i, q);
            }
        }
        // vg[q] = sum_j right[q][j] * logit_grad[j]
        let mut vg = vec![0.0; r];
        for (q, g) in vg.iter_mut().enumerate() {
            for (j, lg) in logit_grad.iter().enumerate() {
                *g += self.factors.right.get(q, j) * lg;
            }
        }

        let mut grad = Vec::with_capacity(self.layer_len());
        for i in 0..h {
            for q in 0..r {
                grad.push(repr[i] * vg[q]);
            }
        }
        for q in 0..r {
            for lg in logit_grad {
                grad.push(proj[q] * lg);
            }
        }
        if self.include_bias {
            grad.extend_from_slice(logit_grad);
        }
        Ok(grad)
    }
}

/// Outcome of attacking the factorized parameterization.
#[derive(Debug, Clone)]
pub struct FactorizedOutcome {
    /// The factorized benign model the attacker saw.
    pub benign: FactorizedModel,
    /// The attacked model.
    pub attacked: FactorizedModel,
    pub mask_history: Vec<SelectionMask>,
    pub importance: ImportanceMatrix,
}

/// Run an attack variant against the factorized classifier.
///
/// Ranking, training, and pruning all operate on factor entries under the
/// same budget `k`; bit accounting compares factor matrices.
pub fn attack_factorized(
    benign: &ModelParams,
    rank: usize,
    dataset: &PoisonedDataset,
    vocab: &Vocabulary,
    cfg: &AttackConfig,
    mode: AttackMode,
) -> Result<FactorizedOutcome> {
    if cfg.target_class >= benign.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "target class {} out of range for {} classes",
            cfg.target_class,
            benign.num_classes()
        )));
    }
    let surface = FactorizedModel::new(benign, rank, cfg.include_bias)?;
    let (attacked, mask_history, importance) = run_attack(&surface, dataset, vocab, cfg, mode)?;
    Ok(FactorizedOutcome {
        benign: surface,
        attacked,
        mask_history,
        importance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::build_poisoned;
    use crate::metrics::argmax;
    use crate::model::forward;
    use crate::synth;
    use crate::trigger::ClausePrefixTrigger;
    use crate::vocab::tokenize;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
        }
        m
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_reconstructs_exactly() {
        let mut eye = Matrix::zeros(3, 3);
        for i in 0..3 {
            eye.set(i, i, 1.0);
        }
        let f = factorize(&eye, 3).unwrap();
        assert!(max_abs_diff(&f.reconstruct(), &eye) < 1e-9);
    }

    #[test]
    fn rank_one_matrix_reconstructs_at_rank_one() {
        // u v^T with a zero leading coefficient in v, so pivoting matters.
        let u = [1.0, -2.0, 0.5, 3.0];
        let v = [0.0, 0.7, -1.3];
        let mut w = Matrix::zeros(4, 3);
        for i in 0..4 {
            for j in 0..3 {
                w.set(i, j, u[i] * v[j]);
            }
        }
        let f = factorize(&w, 1).unwrap();
        assert!(max_abs_diff(&f.reconstruct(), &w) < 1e-9);
    }

    #[test]
    fn random_full_rank_reconstruction_vs_naive_multiply() {
        let w = random_matrix(6, 4, 1);
        let f = factorize(&w, 4).unwrap();
        // Naive multiply oracle.
        let mut prod = Matrix::zeros(6, 4);
        for i in 0..6 {
            for j in 0..4 {
                let mut acc = 0.0;
                for q in 0..4 {
                    acc += f.left.get(i, q) * f.right.get(q, j);
                }
                prod.set(i, j, acc);
            }
        }
        assert!(max_abs_diff(&prod, &w) < 1e-9);
        assert!(max_abs_diff(&f.reconstruct(), &w) < 1e-9);
        // Orthonormal columns.
        for a in 0..4 {
            for b in 0..4 {
                let dot: f64 = (0..6).map(|i| f.left.get(i, a) * f.left.get(i, b)).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn zero_matrix_factorizes_to_zero() {
        let w = Matrix::zeros(4, 2);
        let f = factorize(&w, 2).unwrap();
        assert!(max_abs_diff(&f.reconstruct(), &w) == 0.0);
    }

    #[test]
    fn rank_out_of_range_is_rejected() {
        let w = Matrix::zeros(4, 2);
        assert!(factorize(&w, 0).is_err());
        assert!(factorize(&w, 3).is_err());
    }

    #[test]
    fn factorization_is_deterministic() {
        let w = random_matrix(5, 3, 9);
        let a = factorize(&w, 3).unwrap();
        let b = factorize(&w, 3).unwrap();
        assert_eq!(a, b);
    }

    fn trained_setup() -> (ModelParams, Vec<crate::data::LabeledText>, Vocabulary) {
        let (train, test) = synth::generate(200, 40, 13);
        let vocab = Vocabulary::build(train.iter().map(|s| s.text.as_str()));
        let cfg = crate::train::TrainConfig {
            epochs: 10,
            ..Default::default()
        };
        let params = crate::train::train_benign(&train, &vocab, &cfg).unwrap();
        (params, test, vocab)
    }

    #[test]
    fn full_rank_forward_preserves_predictions() {
        let (params, test, vocab) = trained_setup();
        let rank = params.hidden_dim().min(params.num_classes());
        let fact = FactorizedModel::new(&params, rank, true).unwrap();
        for s in &test {
            let ids = tokenize(&s.text, &vocab).unwrap();
            let dense = forward(&params, &ids).unwrap();
            let via_factors = fact.forward_ids(&ids).unwrap();
            let diff = dense
                .logits
                .iter()
                .zip(&via_factors.logits)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(diff < 1e-9, "logit drift {diff}");
            assert_eq!(argmax(&dense.logits), argmax(&via_factors.logits));
        }
    }

    #[test]
    fn factor_gradients_match_finite_differences() {
        let (params, test, vocab) = trained_setup();
        let rank = params.hidden_dim().min(params.num_classes());
        let fact = FactorizedModel::new(&params, rank, true).unwrap();
        let ids = tokenize(&test[0].text, &vocab).unwrap();
        let trace = fact.forward_ids(&ids).unwrap();
        let lg = vec![0.7, -0.3];
        let rg = vec![0.0; fact.hidden_dim()];
        let grad = fact.layer_grad(&trace, &lg, &rg).unwrap();

        let objective = |m: &FactorizedModel| -> f64 {
            let t = m.forward_ids(&ids).unwrap();
            t.logits.iter().zip(&lg).map(|(a, b)| a * b).sum()
        };
        let eps = 1e-5;
        for idx in 0..fact.layer_len() {
            let mut plus = fact.clone();
            plus.set_layer_value(idx, plus.layer_value(idx) + eps);
            let mut minus = fact.clone();
            minus.set_layer_value(idx, minus.layer_value(idx) - eps);
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * eps);
            let an = grad[idx];
            assert!(
                (an - fd).abs() <= 1e-6 * an.abs().max(fd.abs()).max(1.0),
                "index {idx}: analytic {an}, fd {fd}"
            );
        }
    }

    #[test]
    fn zero_epoch_factorized_attack_keeps_benign_predictions() {
        let (params, test, vocab) = trained_setup();
        let poisoned = build_poisoned(&test, &ClausePrefixTrigger, 1, 2, 0.5, 3).unwrap();
        let cfg = AttackConfig {
            epochs: 0,
            target_class: 1,
            top_k: 20,
            grad_samples: 8,
            ..AttackConfig::default()
        };
        let rank = params.hidden_dim().min(params.num_classes());
        let out =
            attack_factorized(&params, rank, &poisoned, &vocab, &cfg, AttackMode::RliAgr).unwrap();
        for s in &test {
            let ids = tokenize(&s.text, &vocab).unwrap();
            let dense = forward(&params, &ids).unwrap();
            let attacked = out.attacked.forward_ids(&ids).unwrap();
            assert_eq!(argmax(&dense.logits), argmax(&attacked.logits));
        }
    }
}
