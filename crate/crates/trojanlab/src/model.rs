//! A small deterministic text classifier with explicit forward and backward
//! passes.
//!
//! The network is `embedding -> mean pool -> tanh hidden layer -> linear
//! head`, split into an encoder (everything up to the hidden activation,
//! whose output is "the representation") and a classifier (the linear head).
//! All arithmetic is f64.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major f64 matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Wrap a row-major buffer; `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Matrix {
        assert_eq!(data.len(), rows * cols, "matrix buffer size");
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// All weights of the classifier, benign or trojaned.
///
/// Doubles as the gradient store: `backward` returns a `ModelParams` whose
/// tensors hold the gradient of the injected objective with respect to the
/// parameter of the same position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// V x d token embeddings; row 0 is the unknown token.
    pub embedding: Matrix,
    /// d x h encoder weights.
    pub w_enc: Matrix,
    /// h encoder bias.
    pub b_enc: Vec<f64>,
    /// h x C classifier weights.
    pub w_cls: Matrix,
    /// C classifier bias.
    pub b_cls: Vec<f64>,
}

/// The tunable layer for an attack: the linear head or the encoder's hidden
/// layer. Flattened layer indices cover the weight matrix row-major, then the
/// bias when included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetLayer {
    Classifier,
    Encoder,
}

impl ModelParams {
    /// All-zero parameters with the given dimensions.
    pub fn zeros(vocab_size: usize, embed_dim: usize, hidden_dim: usize, classes: usize) -> Self {
        ModelParams {
            embedding: Matrix::zeros(vocab_size, embed_dim),
            w_enc: Matrix::zeros(embed_dim, hidden_dim),
            b_enc: vec![0.0; hidden_dim],
            w_cls: Matrix::zeros(hidden_dim, classes),
            b_cls: vec![0.0; classes],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_enc.len()
    }

    pub fn num_classes(&self) -> usize {
        self.b_cls.len()
    }

    /// Check internal shape consistency.
    pub fn validate(&self) -> Result<()> {
        let (d, h, c) = (self.embed_dim(), self.hidden_dim(), self.num_classes());
        if self.w_enc.rows() != d || self.w_enc.cols() != h {
            return Err(Error::DimensionMismatch(format!(
                "encoder weights are {}x{}, expected {}x{}",
                self.w_enc.rows(),
                self.w_enc.cols(),
                d,
                h
            )));
        }
        if self.w_cls.rows() != h || self.w_cls.cols() != c {
            return Err(Error::DimensionMismatch(format!(
                "classifier weights are {}x{}, expected {}x{}",
                self.w_cls.rows(),
                self.w_cls.cols(),
                h,
                c
            )));
        }
        Ok(())
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn tensors(&self) -> [&[f64]; 5] {
        [
            self.embedding.data(),
            self.w_enc.data(),
            &self.b_enc,
            self.w_cls.data(),
            &self.b_cls,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            self.embedding.data_mut(),
            self.w_enc.data_mut(),
            &mut self.b_enc,
            self.w_cls.data_mut(),
            &mut self.b_cls,
        ]
    }

    /// `self -= scale * other`, tensor by tensor. Shapes must match.
    pub fn step(&mut self, scale: f64, other: &ModelParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            assert_eq!(dst.len(), src.len(), "gradient shape");
            for (d, s) in dst.iter_mut().zip(src) {
                *d -= scale * s;
            }
        }
    }

    /// `self += other` elementwise, used for gradient accumulation.
    pub fn accumulate(&mut self, other: &ModelParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            assert_eq!(dst.len(), src.len(), "gradient shape");
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    /// Multiply every entry by `scale`.
    pub fn scale(&mut self, scale: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= scale;
            }
        }
    }

    /// Number of tunable parameters in `layer`.
    pub fn layer_len(&self, layer: TargetLayer, include_bias: bool) -> usize {
        let (w, b) = self.layer_parts(layer);
        w.data().len() + if include_bias { b.len() } else { 0 }
    }

    /// Read one flattened layer parameter.
    pub fn layer_value(&self, layer: TargetLayer, include_bias: bool, idx: usize) -> f64 {
        let (w, b) = self.layer_parts(layer);
        let nw = w.data().len();
        if idx < nw {
            w.data()[idx]
        } else {
            debug_assert!(include_bias && idx - nw < b.len());
            b[idx - nw]
        }
    }

    /// Write one flattened layer parameter.
    pub fn set_layer_value(&mut self, layer: TargetLayer, idx: usize, v: f64) {
        let (w, b) = self.layer_parts_mut(layer);
        let nw = w.data().len();
        if idx < nw {
            w.data_mut()[idx] = v;
        } else {
            b[idx - nw] = v;
        }
    }

    /// The whole layer as a flat vector (weights row-major, then bias).
    pub fn layer_flat(&self, layer: TargetLayer, include_bias: bool) -> Vec<f64> {
        let (w, b) = self.layer_parts(layer);
        let mut out = w.data().to_vec();
        if include_bias {
            out.extend_from_slice(b);
        }
        out
    }

    fn layer_parts(&self, layer: TargetLayer) -> (&Matrix, &[f64]) {
        match layer {
            TargetLayer::Classifier => (&self.w_cls, &self.b_cls),
            TargetLayer::Encoder => (&self.w_enc, &self.b_enc),
        }
    }

    fn layer_parts_mut(&mut self, layer: TargetLayer) -> (&mut Matrix, &mut [f64]) {
        match layer {
            TargetLayer::Classifier => (&mut self.w_cls, &mut self.b_cls),
            TargetLayer::Encoder => (&mut self.w_enc, &mut self.b_enc),
        }
    }
}

/// Everything produced by one forward pass, with the intermediates backward
/// needs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub ids: Vec<u32>,
    /// Mean of the token embeddings (length d).
    pub pooled: Vec<f64>,
    /// Encoder output after tanh (length h).
    pub representation: Vec<f64>,
    /// Linear head output (length C).
    pub logits: Vec<f64>,
}

/// Check ids are non-empty and within the vocabulary.
pub(crate) fn validate_ids(vocab_size: usize, ids: &[u32]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    for &id in ids {
        if id as usize >= vocab_size {
            return Err(Error::TokenOutOfRange { id, vocab_size });
        }
    }
    Ok(())
}

/// Mean of the embedding rows selected by `ids`.
pub(crate) fn mean_pool(embedding: &Matrix, ids: &[u32]) -> Vec<f64> {
    let d = embedding.cols();
    let mut pooled = vec![0.0; d];
    for &id in ids {
        let row = embedding.row(id as usize);
        for (p, e) in pooled.iter_mut().zip(row) {
            *p += e;
        }
    }
    let inv = 1.0 / ids.len() as f64;
    for p in pooled.iter_mut() {
        *p *= inv;
    }
    pooled
}

/// tanh(pooled . w + b)
pub(crate) fn hidden(pooled: &[f64], w_enc: &Matrix, b_enc: &[f64]) -> Vec<f64> {
    let h = b_enc.len();
    let mut out = vec![0.0; h];
    for (j, o) in out.iter_mut().enumerate() {
        let mut z = b_enc[j];
        for (i, p) in pooled.iter().enumerate() {
            z += p * w_enc.get(i, j);
        }
        *o = z.tanh();
    }
    out
}

/// representation . w + b
pub(crate) fn linear_head(repr: &[f64], w_cls: &Matrix, b_cls: &[f64]) -> Vec<f64> {
    let c = b_cls.len();
    let mut out = vec![0.0; c];
    for (j, o) in out.iter_mut().enumerate() {
        let mut z = b_cls[j];
        for (i, r) in repr.iter().enumerate() {
            z += r * w_cls.get(i, j);
        }
        *o = z;
    }
    out
}

/// Run the full model on a token id sequence.
pub fn forward(params: &ModelParams, ids: &[u32]) -> Result<ForwardTrace> {
    params.validate()?;
    validate_ids(params.vocab_size(), ids)?;
    let pooled = mean_pool(&params.embedding, ids);
    let representation = hidden(&pooled, &params.w_enc, &params.b_enc);
    let logits = linear_head(&representation, &params.w_cls, &params.b_cls);
    Ok(ForwardTrace {
        ids: ids.to_vec(),
        pooled,
        representation,
        logits,
    })
}

/// Exact gradients of `logit_grad . logits + repr_grad . representation`
/// with respect to every parameter.
///
/// Both injection points are live at once so objectives that touch the
/// logits and the representation of the same pass backpropagate in a single
/// call. The returned store has the same shapes as `params`.
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    logit_grad: &[f64],
    repr_grad: &[f64],
) -> Result<ModelParams> {
    let (d, h, c) = (
        params.embed_dim(),
        params.hidden_dim(),
        params.num_classes(),
    );
    if logit_grad.len() != c {
        return Err(Error::DimensionMismatch(format!(
            "logit gradient has length {}, expected {}",
            logit_grad.len(),
            c
        )));
    }
    if repr_grad.len() != h {
        return Err(Error::DimensionMismatch(format!(
            "representation gradient has length {}, expected {}",
            repr_grad.len(),
            h
        )));
    }
    if trace.pooled.len() != d || trace.representation.len() != h {
        return Err(Error::DimensionMismatch(
            "trace does not match model dimensions".into(),
        ));
    }

    let mut grads = ModelParams::zeros(params.vocab_size(), d, h, c);

    // Linear head: d logits / d b_cls = I, d logits / d w_cls[i][j] = r[i].
    grads.b_cls.copy_from_slice(logit_grad);
    for i in 0..h {
        for j in 0..c {
            grads
                .w_cls
                .set(i, j, trace.representation[i] * logit_grad[j]);
        }
    }

    // Into the representation: through the head plus the direct injection.
    let mut d_repr = repr_grad.to_vec();
    for (i, dr) in d_repr.iter_mut().enumerate() {
        for (j, g) in logit_grad.iter().enumerate() {
            *dr += params.w_cls.get(i, j) * g;
        }
    }

    // tanh' (z) = 1 - tanh(z)^2, and representation already holds tanh(z).
    let d_pre: Vec<f64> = d_repr
        .iter()
        .zip(&trace.representation)
        .map(|(dr, r)| dr * (1.0 - r * r))
        .collect();

    grads.b_enc.copy_from_slice(&d_pre);
    for i in 0..d {
        for j in 0..h {
            grads.w_enc.set(i, j, trace.pooled[i] * d_pre[j]);
        }
    }

    // Into the pooled embedding, then fan out over the mean.
    let mut d_pooled = vec![0.0; d];
    for (i, dp) in d_pooled.iter_mut().enumerate() {
        for (j, dz) in d_pre.iter().enumerate() {
            *dp += params.w_enc.get(i, j) * dz;
        }
    }
    let inv = 1.0 / trace.ids.len() as f64;
    for &id in &trace.ids {
        let row = id as usize;
        for (j, dp) in d_pooled.iter().enumerate() {
            let cur = grads.embedding.get(row, j);
            grads.embedding.set(row, j, cur + dp * inv);
        }
    }

    Ok(grads)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Softmax cross-entropy against a class index, natural log.
pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Gradient of [`cross_entropy`] with respect to the logits:
/// `softmax(logits) - onehot(label)`.
pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Vec<f64> {
    let mut g = softmax(logits);
    g[label] -= 1.0;
    g
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent re-computation of the forward pass with straight loops,
    /// kept free of the production helpers on purpose.
    pub(crate) fn naive_forward(p: &ModelParams, ids: &[u32]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (d, h, c) = (p.embed_dim(), p.hidden_dim(), p.num_classes());
        let mut pooled = vec![0.0; d];
        for &id in ids {
            for j in 0..d {
                pooled[j] += p.embedding.get(id as usize, j) / ids.len() as f64;
            }
        }
        let mut repr = vec![0.0; h];
        for j in 0..h {
            let mut z = p.b_enc[j];
            for i in 0..d {
                z += pooled[i] * p.w_enc.get(i, j);
            }
            repr[j] = z.tanh();
        }
        let mut logits = vec![0.0; c];
        for j in 0..c {
            let mut z = p.b_cls[j];
            for i in 0..h {
                z += repr[i] * p.w_cls.get(i, j);
            }
            logits[j] = z;
        }
        (pooled, repr, logits)
    }

    pub(crate) fn random_params(
        rng: &mut ChaCha8Rng,
        v: usize,
        d: usize,
        h: usize,
        c: usize,
    ) -> ModelParams {
        let mut p = ModelParams::zeros(v, d, h, c);
        for t in p.tensors_mut() {
            for x in t.iter_mut() {
                *x = rng.gen_range(-0.5..0.5);
            }
        }
        p
    }

    #[test]
    fn zero_params_give_zero_logits() {
        let p = ModelParams::zeros(4, 3, 2, 2);
        let t = forward(&p, &[1, 2, 3]).unwrap();
        assert!(t.logits.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn identity_like_scalar_model() {
        // d = h = C = 1, W = 1, b = 0, embedding value 0.
        let mut p = ModelParams::zeros(2, 1, 1, 1);
        p.w_enc.set(0, 0, 1.0);
        p.w_cls.set(0, 0, 1.0);
        let t = forward(&p, &[1]).unwrap();
        assert_eq!(t.representation, vec![0.0]);
        assert_eq!(t.logits, vec![0.0]);
    }

    #[test]
    fn forward_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_params(&mut rng, 9, 5, 4, 3);
            let ids: Vec<u32> = (0..6).map(|_| rng.gen_range(0..9)).collect();
            let t = forward(&p, &ids).unwrap();
            let (pooled, repr, logits) = naive_forward(&p, &ids);
            for (a, b) in t.pooled.iter().zip(&pooled) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in t.representation.iter().zip(&repr) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in t.logits.iter().zip(&logits) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_bad_ids_and_empty_input() {
        let p = ModelParams::zeros(3, 2, 2, 2);
        assert!(matches!(forward(&p, &[]), Err(Error::EmptyInput)));
        assert!(matches!(
            forward(&p, &[3]),
            Err(Error::TokenOutOfRange { .. })
        ));
    }

    #[test]
    fn forward_rejects_inconsistent_params() {
        let mut p = ModelParams::zeros(3, 2, 2, 2);
        p.w_enc = Matrix::zeros(5, 2);
        assert!(matches!(
            forward(&p, &[1]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn encoder_classifier_split_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_params(&mut rng, 8, 4, 3, 2);
        let t = forward(&p, &[1, 5, 2]).unwrap();
        // Classifier applied to the stored representation alone.
        let logits = linear_head(&t.representation, &p.w_cls, &p.b_cls);
        assert_eq!(logits, t.logits);
    }

    #[test]
    fn zero_injection_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_params(&mut rng, 6, 3, 3, 2);
        let t = forward(&p, &[0, 2, 4]).unwrap();
        let g = backward(&p, &t, &[0.0, 0.0], &[0.0; 3]).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn classifier_bias_gradient_is_logit_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_params(&mut rng, 6, 3, 3, 2);
        let t = forward(&p, &[1, 2]).unwrap();
        let lg = vec![0.3, -0.7];
        let g = backward(&p, &t, &lg, &[0.0; 3]).unwrap();
        assert_eq!(g.b_cls, lg);
    }

    #[test]
    fn backward_shape_mismatch() {
        let p = ModelParams::zeros(3, 2, 2, 2);
        let t = forward(&p, &[1]).unwrap();
        assert!(backward(&p, &t, &[0.0], &[0.0, 0.0]).is_err());
        assert!(backward(&p, &t, &[0.0, 0.0], &[0.0]).is_err());
    }

    // Central finite differences of J = lg . logits + rg . representation,
    // evaluated through the naive oracle forward.
    fn fd_check(v: usize, d: usize, h: usize, c: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, v, d, h, c);
        let ids: Vec<u32> = (0..4).map(|_| rng.gen_range(0..v as u32)).collect();
        let lg: Vec<f64> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rg: Vec<f64> = (0..h).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let trace = forward(&p, &ids).unwrap();
        let analytic = backward(&p, &trace, &lg, &rg).unwrap();

        let objective = |p: &ModelParams| -> f64 {
            let (_, repr, logits) = naive_forward(p, &ids);
            logits.iter().zip(&lg).map(|(a, b)| a * b).sum::<f64>()
                + repr.iter().zip(&rg).map(|(a, b)| a * b).sum::<f64>()
        };

        let eps = 1e-4;
        for ti in 0..5 {
            let n = analytic.tensors()[ti].len();
            for k in 0..n {
                let mut plus = p.clone();
                plus.tensors_mut()[ti][k] += eps;
                let mut minus = p.clone();
                minus.tensors_mut()[ti][k] -= eps;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * eps);
                let an = analytic.tensors()[ti][k];
                let denom = an.abs().max(fd.abs());
                let ok = (an - fd).abs() <= 1e-4 * denom || (an - fd).abs() <= 1e-8;
                assert!(ok, "tensor {ti} index {k}: analytic {an}, fd {fd}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(7, 4, 3, 2, 17);
        fd_check(5, 2, 5, 3, 23);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_params(&mut rng, 8, 4, 3, 2);
        let a = forward(&p, &[1, 2, 3]).unwrap();
        let b = forward(&p, &[1, 2, 3]).unwrap();
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.representation, b.representation);
    }

    #[test]
    fn softmax_cross_entropy_basics() {
        // Uniform logits over two classes: CE = ln 2.
        let ce = cross_entropy(&[0.0, 0.0], 0);
        assert!((ce - std::f64::consts::LN_2).abs() < 1e-12);
        let sm = softmax(&[0.0, 0.0]);
        assert!((sm[0] - 0.5).abs() < 1e-12);
        let g = cross_entropy_grad(&[0.0, 0.0], 1);
        assert!((g[0] - 0.5).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn layer_view_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = random_params(&mut rng, 4, 3, 3, 2);
        let n = p.layer_len(TargetLayer::Classifier, true);
        assert_eq!(n, 3 * 2 + 2);
        let flat = p.layer_flat(TargetLayer::Classifier, true);
        for (i, &v) in flat.iter().enumerate() {
            assert_eq!(p.layer_value(TargetLayer::Classifier, true, i), v);
        }
        p.set_layer_value(TargetLayer::Classifier, n - 1, 42.0);
        assert_eq!(p.b_cls[1], 42.0);
        // Without bias the layer is just the weight matrix.
        assert_eq!(p.layer_len(TargetLayer::Encoder, false), 9);
    }
}
