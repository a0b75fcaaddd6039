//! Temperature and top-k sampling over raw logits.
//!
//! The distribution is exact and inspectable: `sampling_distribution` returns
//! the full-vocabulary probability vector that `sample_token` draws from, so
//! tests can compare observed frequencies against closed-form values instead
//! of trusting the sampler.

use super::KernelError;
use crate::rng::SplitMix64;

/// Defaults favour mild pruning: temperature 0.85 with the 50 highest logits
/// kept.
pub const DEFAULT_TEMPERATURE: f64 = 0.85;
pub const DEFAULT_TOP_K: usize = 50;

// ==== configuration =========================================================

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            top_k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !self.temperature.is_finite() || self.temperature <= 0.0 {
            return Err(KernelError::InvalidConfig(format!(
                "temperature must be finite and positive, got {}",
                self.temperature
            )));
        }
        if self.top_k == 0 {
            return Err(KernelError::InvalidConfig(
                "top_k must be at least 1".to_string(),
            ));
        }
        Ok(())
    }

    /// Generator seeded from this config; callers that interleave sampling
    /// with other draws should thread one generator through everything.
    pub fn rng(&self) -> SplitMix64 {
        SplitMix64::new(self.seed)
    }
}

// ==== distribution ===========================================================

fn check_logits(logits: &[f64]) -> Result<(), KernelError> {
    if logits.is_empty() {
        return Err(KernelError::EmptyLogits);
    }
    for (index, l) in logits.iter().enumerate() {
        if !l.is_finite() {
            return Err(KernelError::NonFiniteLogit { index });
        }
    }
    Ok(())
}

/// Indices of the `k` largest logits. A tie at the cut keeps the lower index.
fn top_k_indices(logits: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..logits.len()).collect();
    order.sort_by(|&a, &b| {
        logits[b]
            .partial_cmp(&logits[a])
            .expect("logits checked finite")
            .then(a.cmp(&b))
    });
    order.truncate(k.min(logits.len()));
    order
}

/// Full-vocabulary probabilities: the `top_k` highest logits get
/// `softmax(logit / temperature)` mass (max-subtracted, so huge logits are
/// safe) and every pruned position gets exactly zero. `top_k` larger than the
/// vocabulary keeps everything.
pub fn sampling_distribution(
    logits: &[f64],
    config: &SamplingConfig,
) -> Result<Vec<f64>, KernelError> {
    config.validate()?;
    check_logits(logits)?;
    let kept = top_k_indices(logits, config.top_k);
    let scaled: Vec<f64> = kept.iter().map(|&i| logits[i] / config.temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut dist = vec![0.0; logits.len()];
    for (slot, e) in kept.into_iter().zip(exps) {
        dist[slot] = e / total;
    }
    Ok(dist)
}

// ==== sampling ===============================================================

/// Draw one token index from `sampling_distribution(logits, config)`.
///
/// `top_k == 1` is deterministic: the argmax (lowest index on a tie) is
/// returned without consuming any randomness, so greedy decoding does not
/// perturb a shared generator.
pub fn sample_token(
    logits: &[f64],
    config: &SamplingConfig,
    rng: &mut SplitMix64,
) -> Result<usize, KernelError> {
    config.validate()?;
    check_logits(logits)?;
    if config.top_k == 1 {
        let mut best = 0;
        for (i, l) in logits.iter().enumerate().skip(1) {
            if *l > logits[best] {
                best = i;
            }
        }
        return Ok(best);
    }
    let dist = sampling_distribution(logits, config)?;
    let u = rng.next_f64();
    let mut acc = 0.0;
    let mut last_kept = 0;
    for (i, p) in dist.iter().enumerate() {
        if *p > 0.0 {
            last_kept = i;
        }
        acc += p;
        if u < acc {
            return Ok(i);
        }
    }
    // Rounding can leave the cumulative a hair below 1.0; the draw then lands
    // on the final surviving token.
    Ok(last_kept)
}
