//! Multi-head scaled dot-product attention and perceiver-style resampling.
//!
//! Per head: `softmax(Q Kᵀ / sqrt(d_head)) V` with Q, K, V projected by that
//! head's matrices; head outputs are concatenated and sent through the output
//! projection. Scaling is by the per-head width `sqrt(d_head)`, the standard
//! multi-head convention. No positional encodings anywhere: keys carry no
//! order, which the permutation tests rely on.

use super::matrix::Matrix;
use super::KernelError;
use crate::rng::SplitMix64;

/// Projection matrices for one attention block.
///
/// Per-head `w_q[h]`, `w_k[h]`, `w_v[h]` are `d x d_head`; the output
/// projection `w_o` is `(heads * d_head) x d` with `d_head = d / heads`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    heads: usize,
    d: usize,
    w_q: Vec<Matrix>,
    w_k: Vec<Matrix>,
    w_v: Vec<Matrix>,
    w_o: Matrix,
}

impl AttentionWeights {
    pub fn new(
        heads: usize,
        w_q: Vec<Matrix>,
        w_k: Vec<Matrix>,
        w_v: Vec<Matrix>,
        w_o: Matrix,
    ) -> Result<Self, KernelError> {
        if heads == 0 {
            return Err(KernelError::Dimension("need at least one head".to_string()));
        }
        let d = w_o.cols();
        if !d.is_multiple_of(heads) {
            return Err(KernelError::Dimension(format!(
                "model dim {d} is not divisible by {heads} heads"
            )));
        }
        let d_head = d / heads;
        for (name, set) in [("w_q", &w_q), ("w_k", &w_k), ("w_v", &w_v)] {
            if set.len() != heads {
                return Err(KernelError::Dimension(format!(
                    "{name} has {} matrices for {heads} heads",
                    set.len()
                )));
            }
            for (h, m) in set.iter().enumerate() {
                if m.rows() != d || m.cols() != d_head {
                    return Err(KernelError::Dimension(format!(
                        "{name}[{h}] is {}x{}, expected {d}x{d_head}",
                        m.rows(),
                        m.cols()
                    )));
                }
            }
        }
        if w_o.rows() != heads * d_head {
            return Err(KernelError::Dimension(format!(
                "w_o has {} rows, expected {}",
                w_o.rows(),
                heads * d_head
            )));
        }
        Ok(Self {
            heads,
            d,
            w_q,
            w_k,
            w_v,
            w_o,
        })
    }

    /// Weights that make attention a pure mixing operation: head h projects
    /// onto columns `h*d_head..(h+1)*d_head`, so concatenating head outputs
    /// reassembles the value rows, and `w_o` is the identity.
    pub fn identity(d: usize, heads: usize) -> Result<Self, KernelError> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(KernelError::Dimension(format!(
                "model dim {d} is not divisible by {heads} heads"
            )));
        }
        let d_head = d / heads;
        let mut blocks = Vec::with_capacity(heads);
        for h in 0..heads {
            let mut data = vec![0.0; d * d_head];
            for j in 0..d_head {
                data[(h * d_head + j) * d_head + j] = 1.0;
            }
            blocks.push(Matrix::new(d, d_head, data)?);
        }
        Self::new(
            heads,
            blocks.clone(),
            blocks.clone(),
            blocks,
            Matrix::identity(d)?,
        )
    }

    /// Independent uniform weights in [-1, 1), scaled down by the model dim
    /// to keep logits tame.
    pub fn random(d: usize, heads: usize, rng: &mut SplitMix64) -> Result<Self, KernelError> {
        if heads == 0 || !d.is_multiple_of(heads) {
            return Err(KernelError::Dimension(format!(
                "model dim {d} is not divisible by {heads} heads"
            )));
        }
        let d_head = d / heads;
        let scale = 1.0 / (d as f64).sqrt();
        let mut draw = |rows: usize, cols: usize| -> Result<Matrix, KernelError> {
            let data = (0..rows * cols)
                .map(|_| (rng.next_f64() * 2.0 - 1.0) * scale)
                .collect();
            Matrix::new(rows, cols, data)
        };
        let mut w_q = Vec::new();
        let mut w_k = Vec::new();
        let mut w_v = Vec::new();
        for _ in 0..heads {
            w_q.push(draw(d, d_head)?);
            w_k.push(draw(d, d_head)?);
            w_v.push(draw(d, d_head)?);
        }
        let w_o = draw(heads * d_head, d)?;
        Self::new(heads, w_q, w_k, w_v, w_o)
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn d_head(&self) -> usize {
        self.d / self.heads
    }
}

/// Row-wise softmax with max-subtraction, so no finite input can overflow.
pub fn softmax_rows(scores: &Matrix) -> Result<Matrix, KernelError> {
    let mut data = Vec::with_capacity(scores.rows() * scores.cols());
    for r in 0..scores.rows() {
        let row = scores.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        data.extend(exps.into_iter().map(|e| e / total));
    }
    Matrix::new(scores.rows(), scores.cols(), data)
}

/// Multi-head scaled dot-product attention.
///
/// `q_in` is `L_q x d`; `k_in` and `v_in` share a row count and are also
/// width `d`. The output is `L_q x d`.
pub fn attention(
    q_in: &Matrix,
    k_in: &Matrix,
    v_in: &Matrix,
    weights: &AttentionWeights,
) -> Result<Matrix, KernelError> {
    let d = weights.d();
    for (name, m) in [("query", q_in), ("key", k_in), ("value", v_in)] {
        if m.cols() != d {
            return Err(KernelError::Dimension(format!(
                "{name} input has width {}, expected {d}",
                m.cols()
            )));
        }
    }
    if k_in.rows() != v_in.rows() {
        return Err(KernelError::Dimension(format!(
            "key rows {} != value rows {}",
            k_in.rows(),
            v_in.rows()
        )));
    }

    let scale = 1.0 / (weights.d_head() as f64).sqrt();
    let mut head_outputs = Vec::with_capacity(weights.heads);
    for h in 0..weights.heads {
        let q = q_in.matmul(&weights.w_q[h])?;
        let k = k_in.matmul(&weights.w_k[h])?;
        let v = v_in.matmul(&weights.w_v[h])?;
        let mut scores = q.matmul(&k.transpose())?;
        scores = Matrix::new(
            scores.rows(),
            scores.cols(),
            scores.data().iter().map(|s| s * scale).collect(),
        )?;
        let probs = softmax_rows(&scores)?;
        head_outputs.push(probs.matmul(&v)?);
    }
    let refs: Vec<&Matrix> = head_outputs.iter().collect();
    Matrix::concat_cols(&refs)?.matmul(&weights.w_o)
}

/// Cross-attention with caller-supplied latents as queries: maps an `L x d`
/// input to exactly `latents.rows() x d`, whatever L is.
pub fn perceiver_resample(
    input: &Matrix,
    latents: &Matrix,
    weights: &AttentionWeights,
) -> Result<Matrix, KernelError> {
    attention(latents, input, input, weights)
}
