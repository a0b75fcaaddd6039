//! Training-objective arithmetic for the two-stage synthesizer: weighted
//! cross-entropy over the text and audio token streams, and the vocoder's
//! adversarial, feature-matching, and mel reconstruction losses.
//!
//! Discriminator outputs arrive as recorded score/feature traces rather than
//! being computed here, so every formula is a closed-form function of its
//! inputs and exactly testable. A finite-difference gradient checker guards
//! the two analytic gradients this module exports.

use crate::config::{ConfigError, KvConfig};
use crate::dsp::mel::MelSpectrogram;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// Central-difference step used by the self-checks.
pub const DEFAULT_GRAD_EPS: f64 = 1e-4;
/// Relative tolerance an analytic gradient must meet.
pub const DEFAULT_GRAD_TOLERANCE: f64 = 1e-5;

// ==== errors =================================================================

#[derive(Debug, Error)]
pub enum LossError {
    #[error("token batch must contain at least one step")]
    EmptyBatch,
    #[error("batch has {logits} logit rows but {targets} targets")]
    StepMismatch { logits: usize, targets: usize },
    #[error("step {step} has {got} logits, expected {expected}")]
    RaggedLogits {
        step: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite logit at step {step}, index {index}")]
    NonFiniteLogit { step: usize, index: usize },
    #[error("step {step} target {target} outside vocabulary of {vocab}")]
    TargetOutOfRange {
        step: usize,
        target: usize,
        vocab: usize,
    },
    #[error("score lists must be non-empty")]
    EmptyScores,
    #[error("trace has {real} real scores but {fake} fake scores")]
    ScoreCountMismatch { real: usize, fake: usize },
    #[error("non-finite {side} score at index {index}")]
    NonFiniteScore { side: &'static str, index: usize },
    #[error("trace has {real} real feature layers but {fake} fake layers")]
    LayerCountMismatch { real: usize, fake: usize },
    #[error("feature layer {layer} has {real} real entries but {fake} fake entries")]
    LayerShapeMismatch {
        layer: usize,
        real: usize,
        fake: usize,
    },
    #[error("feature layer {layer} is empty")]
    EmptyLayer { layer: usize },
    #[error("non-finite feature in layer {layer} at index {index}")]
    NonFiniteFeature { layer: usize, index: usize },
    #[error("spectrogram configs differ; losses compare like with like")]
    MelConfigMismatch,
    #[error("spectrograms are {real_frames}x{real_bins} vs {fake_frames}x{fake_bins}")]
    MelShapeMismatch {
        real_frames: usize,
        real_bins: usize,
        fake_frames: usize,
        fake_bins: usize,
    },
    #[error("spectrograms must contain at least one frame")]
    EmptyMel,
    #[error("need at least one discriminator trace")]
    NoTraces,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("gradient has {analytic} entries but the point has {point}")]
    GradShapeMismatch { analytic: usize, point: usize },
    #[error("gradient check needs a non-empty point")]
    EmptyPoint,
    #[error("eps must be finite and positive, got {eps}")]
    NonPositiveEps { eps: f64 },
    #[error("function evaluated non-finite near coordinate {coordinate}")]
    NonFiniteEval { coordinate: usize },
    #[error("line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

// ==== token batches ==========================================================

/// A sequence of logit rows with one target index per step. Validity is
/// enforced here once, so the loss functions below are total.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBatch {
    logits: Vec<Vec<f64>>,
    targets: Vec<usize>,
}

impl TokenBatch {
    pub fn new(logits: Vec<Vec<f64>>, targets: Vec<usize>) -> Result<Self, LossError> {
        if logits.is_empty() {
            return Err(LossError::EmptyBatch);
        }
        if logits.len() != targets.len() {
            return Err(LossError::StepMismatch {
                logits: logits.len(),
                targets: targets.len(),
            });
        }
        let vocab = logits[0].len();
        if vocab == 0 {
            return Err(LossError::RaggedLogits {
                step: 0,
                got: 0,
                expected: 1,
            });
        }
        for (step, row) in logits.iter().enumerate() {
            if row.len() != vocab {
                return Err(LossError::RaggedLogits {
                    step,
                    got: row.len(),
                    expected: vocab,
                });
            }
            for (index, l) in row.iter().enumerate() {
                if !l.is_finite() {
                    return Err(LossError::NonFiniteLogit { step, index });
                }
            }
        }
        for (step, &target) in targets.iter().enumerate() {
            if target >= vocab {
                return Err(LossError::TargetOutOfRange {
                    step,
                    target,
                    vocab,
                });
            }
        }
        Ok(Self { logits, targets })
    }

    pub fn steps(&self) -> usize {
        self.logits.len()
    }

    pub fn vocab(&self) -> usize {
        self.logits[0].len()
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }
}

// ==== cross-entropy ==========================================================

/// Mean over steps of `-log softmax(logits)[target]`, computed as
/// `logsumexp(logits) - logits[target]` with max-subtraction so extreme
/// logits cannot overflow.
pub fn cross_entropy(batch: &TokenBatch) -> f64 {
    let mut total = 0.0;
    for (row, &target) in batch.logits.iter().zip(&batch.targets) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += lse - row[target];
    }
    total / batch.steps() as f64
}

/// Gradient of [`cross_entropy`] with respect to every logit:
/// `(softmax(row) - onehot(target)) / steps`, shaped like the logits.
pub fn cross_entropy_grad(batch: &TokenBatch) -> Vec<Vec<f64>> {
    let steps = batch.steps() as f64;
    batch
        .logits
        .iter()
        .zip(&batch.targets)
        .map(|(row, &target)| {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            exps.iter()
                .enumerate()
                .map(|(j, e)| {
                    let p = e / z;
                    (if j == target { p - 1.0 } else { p }) / steps
                })
                .collect()
        })
        .collect()
}

// ==== stream weighting =======================================================

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_LAMBDA_FM: f64 = 2.0;
pub const DEFAULT_LAMBDA_MEL: f64 = 45.0;

const LOSS_WEIGHT_KEYS: &[&str] = &["alpha", "beta", "lambda_fm", "lambda_mel"];

/// Scalar weights for composing the individual losses.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// Text-stream cross-entropy weight.
    pub alpha: f64,
    /// Audio-stream cross-entropy weight.
    pub beta: f64,
    /// Feature-matching weight inside the generator total.
    pub lambda_fm: f64,
    /// Mel reconstruction weight inside the generator total.
    pub lambda_mel: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            lambda_fm: DEFAULT_LAMBDA_FM,
            lambda_mel: DEFAULT_LAMBDA_MEL,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda_fm", self.lambda_fm),
            ("lambda_mel", self.lambda_mel),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(LossError::InvalidWeights(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Overlay values from a parsed config onto the defaults. Unknown keys
    /// are rejected.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, LossError> {
        kv.reject_unknown(LOSS_WEIGHT_KEYS)?;
        let mut w = Self::default();
        if let Some(v) = kv.get_f64("alpha")? {
            w.alpha = v;
        }
        if let Some(v) = kv.get_f64("beta")? {
            w.beta = v;
        }
        if let Some(v) = kv.get_f64("lambda_fm")? {
            w.lambda_fm = v;
        }
        if let Some(v) = kv.get_f64("lambda_mel")? {
            w.lambda_mel = v;
        }
        w.validate()?;
        Ok(w)
    }

    pub fn from_file(path: &Path) -> Result<Self, LossError> {
        Self::from_kv(&KvConfig::from_file(path)?)
    }
}

/// The language-model losses, individually and combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmLosses {
    pub text: f64,
    pub audio: f64,
    pub total: f64,
}

/// Weighted combination of already-computed stream losses:
/// `alpha * l_text + beta * l_audio`.
pub fn lm_weighted(l_text: f64, l_audio: f64, w: &LossWeights) -> f64 {
    w.alpha * l_text + w.beta * l_audio
}

/// Cross-entropy per stream plus their weighted total.
pub fn lm_total(text: &TokenBatch, audio: &TokenBatch, w: &LossWeights) -> LmLosses {
    let l_text = cross_entropy(text);
    let l_audio = cross_entropy(audio);
    LmLosses {
        text: l_text,
        audio: l_audio,
        total: lm_weighted(l_text, l_audio, w),
    }
}

// ==== discriminator traces ===================================================

/// Recorded discriminator outputs for one sub-discriminator: paired
/// real/fake scores (one per sample) and per-layer intermediate features.
///
/// When a trace covers a whole batch, the per-layer feature vectors are
/// expected flattened across the batch, so the per-layer `1/N` division in
/// [`fm_loss`] realizes the batch mean as well.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorTrace {
    #[serde(rename = "real")]
    pub real_scores: Vec<f64>,
    #[serde(rename = "fake")]
    pub fake_scores: Vec<f64>,
    /// Per-layer features of the real signal; absent in a trace file means
    /// no feature matching (zero layers).
    #[serde(rename = "features_real", default)]
    pub real_features: Vec<Vec<f64>>,
    #[serde(rename = "features_fake", default)]
    pub fake_features: Vec<Vec<f64>>,
}

impl DiscriminatorTrace {
    pub fn validate(&self) -> Result<(), LossError> {
        if self.real_scores.is_empty() || self.fake_scores.is_empty() {
            return Err(LossError::EmptyScores);
        }
        if self.real_scores.len() != self.fake_scores.len() {
            return Err(LossError::ScoreCountMismatch {
                real: self.real_scores.len(),
                fake: self.fake_scores.len(),
            });
        }
        for (side, scores) in [("real", &self.real_scores), ("fake", &self.fake_scores)] {
            if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
                return Err(LossError::NonFiniteScore { side, index });
            }
        }
        if self.real_features.len() != self.fake_features.len() {
            return Err(LossError::LayerCountMismatch {
                real: self.real_features.len(),
                fake: self.fake_features.len(),
            });
        }
        for (layer, (real, fake)) in self
            .real_features
            .iter()
            .zip(&self.fake_features)
            .enumerate()
        {
            if real.len() != fake.len() {
                return Err(LossError::LayerShapeMismatch {
                    layer,
                    real: real.len(),
                    fake: fake.len(),
                });
            }
            if real.is_empty() {
                return Err(LossError::EmptyLayer { layer });
            }
            if let Some(index) = real
                .iter()
                .chain(fake.iter())
                .position(|v| !v.is_finite())
            {
                return Err(LossError::NonFiniteFeature {
                    layer,
                    index: index % real.len(),
                });
            }
        }
        Ok(())
    }
}

/// Parse line-delimited trace objects; blank lines are skipped and every
/// failure carries its 1-based line number.
pub fn parse_traces(text: &str) -> Result<Vec<DiscriminatorTrace>, LossError> {
    let mut traces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let trace: DiscriminatorTrace =
            serde_json::from_str(line).map_err(|e| LossError::Line {
                line: i + 1,
                detail: e.to_string(),
            })?;
        trace.validate().map_err(|e| LossError::Line {
            line: i + 1,
            detail: e.to_string(),
        })?;
        traces.push(trace);
    }
    Ok(traces)
}

pub fn read_traces(path: &Path) -> Result<Vec<DiscriminatorTrace>, LossError> {
    parse_traces(&fs::read_to_string(path)?)
}

pub fn traces_to_string(traces: &[DiscriminatorTrace]) -> String {
    let mut out = String::new();
    for trace in traces {
        out.push_str(&serde_json::to_string(trace).expect("trace serializes"));
        out.push('\n');
    }
    out
}

// ==== adversarial losses =====================================================

/// Discriminator objective: mean over samples of `(real - 1)^2 + fake^2`.
/// Zero exactly when every real score is 1 and every fake score is 0.
pub fn adv_d(trace: &DiscriminatorTrace) -> Result<f64, LossError> {
    trace.validate()?;
    let n = trace.real_scores.len() as f64;
    let total: f64 = trace
        .real_scores
        .iter()
        .zip(&trace.fake_scores)
        .map(|(r, f)| (r - 1.0) * (r - 1.0) + f * f)
        .sum();
    Ok(total / n)
}

/// Generator objective: mean over samples of `(fake - 1)^2`. Zero exactly
/// when the generator fully fools the discriminator.
pub fn adv_g(trace: &DiscriminatorTrace) -> Result<f64, LossError> {
    trace.validate()?;
    let n = trace.fake_scores.len() as f64;
    let total: f64 = trace.fake_scores.iter().map(|f| (f - 1.0) * (f - 1.0)).sum();
    Ok(total / n)
}

// ==== reconstruction losses ==================================================

/// Mean absolute elementwise difference between two equally shaped
/// spectrograms produced under the same config.
pub fn mel_loss(real: &MelSpectrogram, fake: &MelSpectrogram) -> Result<f64, LossError> {
    check_mel_pair(real, fake)?;
    let count = (real.num_frames() * real.mel_bins()) as f64;
    let mut total = 0.0;
    for (r, f) in real.frames().iter().zip(fake.frames()) {
        for (a, b) in r.iter().zip(f) {
            total += (a - b).abs();
        }
    }
    Ok(total / count)
}

/// Subgradient of [`mel_loss`] with respect to the fake spectrogram:
/// `sign(fake - real) / count`, with 0 taken at exact ties.
pub fn mel_loss_grad(
    real: &MelSpectrogram,
    fake: &MelSpectrogram,
) -> Result<Vec<Vec<f64>>, LossError> {
    check_mel_pair(real, fake)?;
    let count = (real.num_frames() * real.mel_bins()) as f64;
    Ok(real
        .frames()
        .iter()
        .zip(fake.frames())
        .map(|(r, f)| {
            r.iter()
                .zip(f)
                .map(|(a, b)| {
                    let d = b - a;
                    if d == 0.0 {
                        0.0
                    } else {
                        d.signum() / count
                    }
                })
                .collect()
        })
        .collect())
}

fn check_mel_pair(real: &MelSpectrogram, fake: &MelSpectrogram) -> Result<(), LossError> {
    if real.config() != fake.config() {
        return Err(LossError::MelConfigMismatch);
    }
    if real.num_frames() == 0 || fake.num_frames() == 0 {
        return Err(LossError::EmptyMel);
    }
    if real.num_frames() != fake.num_frames() {
        return Err(LossError::MelShapeMismatch {
            real_frames: real.num_frames(),
            real_bins: real.mel_bins(),
            fake_frames: fake.num_frames(),
            fake_bins: fake.mel_bins(),
        });
    }
    Ok(())
}

/// Feature matching: sum over layers of the per-layer mean absolute
/// difference, i.e. `sum_i (1/N_i) * sum_j |real[i][j] - fake[i][j]|`.
/// A trace without feature layers contributes zero.
pub fn fm_loss(trace: &DiscriminatorTrace) -> Result<f64, LossError> {
    trace.validate()?;
    let mut total = 0.0;
    for (real, fake) in trace.real_features.iter().zip(&trace.fake_features) {
        let l1: f64 = real.iter().zip(fake).map(|(r, f)| (r - f).abs()).sum();
        total += l1 / real.len() as f64;
    }
    Ok(total)
}

// ==== vocoder totals =========================================================

/// Full generator objective over K sub-discriminators:
/// `sum_k [adv_g(k) + lambda_fm * fm(k)] + lambda_mel * mel`.
pub fn hifi_generator_total(
    traces: &[DiscriminatorTrace],
    real_mel: &MelSpectrogram,
    fake_mel: &MelSpectrogram,
    w: &LossWeights,
) -> Result<f64, LossError> {
    w.validate()?;
    if traces.is_empty() {
        return Err(LossError::NoTraces);
    }
    let mut total = 0.0;
    for trace in traces {
        total += adv_g(trace)? + w.lambda_fm * fm_loss(trace)?;
    }
    Ok(total + w.lambda_mel * mel_loss(real_mel, fake_mel)?)
}

/// Full discriminator objective: the sum of [`adv_d`] over every trace.
pub fn hifi_discriminator_total(traces: &[DiscriminatorTrace]) -> Result<f64, LossError> {
    if traces.is_empty() {
        return Err(LossError::NoTraces);
    }
    let mut total = 0.0;
    for trace in traces {
        total += adv_d(trace)?;
    }
    Ok(total)
}

// ==== gradient checking ======================================================

/// Compare an analytic gradient against central differences of `f` at
/// `point`, returning the worst relative error
/// `|analytic - numeric| / max(1, |analytic|)` over coordinates.
///
/// `f` is evaluated serially, twice per coordinate, so it need not be
/// thread-safe.
pub fn grad_check<F>(
    f: F,
    analytic: &[f64],
    point: &[f64],
    eps: f64,
) -> Result<f64, LossError>
where
    F: Fn(&[f64]) -> f64,
{
    if !eps.is_finite() || eps <= 0.0 {
        return Err(LossError::NonPositiveEps { eps });
    }
    if analytic.len() != point.len() {
        return Err(LossError::GradShapeMismatch {
            analytic: analytic.len(),
            point: point.len(),
        });
    }
    if point.is_empty() {
        return Err(LossError::EmptyPoint);
    }
    let mut x = point.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..point.len() {
        x[i] = point[i] + eps;
        let hi = f(&x);
        x[i] = point[i] - eps;
        let lo = f(&x);
        x[i] = point[i];
        if !hi.is_finite() || !lo.is_finite() {
            return Err(LossError::NonFiniteEval { coordinate: i });
        }
        let numeric = (hi - lo) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::mel::MelConfig;
    use crate::rng::SplitMix64;

    fn batch(logits: Vec<Vec<f64>>, targets: Vec<usize>) -> TokenBatch {
        TokenBatch::new(logits, targets).unwrap()
    }

    fn spectrogram(frames: Vec<Vec<f64>>) -> MelSpectrogram {
        let bins = frames.first().map_or(1, Vec::len);
        let config = MelConfig {
            mel_bins: bins,
            ..MelConfig::default()
        };
        MelSpectrogram::from_frames(frames, config).unwrap()
    }

    fn trace(real: &[f64], fake: &[f64]) -> DiscriminatorTrace {
        DiscriminatorTrace {
            real_scores: real.to_vec(),
            fake_scores: fake.to_vec(),
            real_features: Vec::new(),
            fake_features: Vec::new(),
        }
    }

    // ==== cross-entropy ====

    #[test]
    fn confident_prediction_costs_nothing() {
        let mut logits = vec![vec![0.0; 4]; 3];
        for (step, row) in logits.iter_mut().enumerate() {
            row[step] = 30.0;
        }
        let b = batch(logits, vec![0, 1, 2]);
        assert!(cross_entropy(&b) < 1e-9);
    }

    #[test]
    fn uniform_logits_cost_log_vocab() {
        let b = batch(vec![vec![0.0; 4]; 2], vec![1, 3]);
        assert_eq!(cross_entropy(&b), 4.0_f64.ln());
        // Shift invariance, up to rounding.
        let shifted = batch(vec![vec![0.7; 4]; 2], vec![1, 3]);
        assert!((cross_entropy(&shifted) - 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn matches_long_form_oracle() {
        let mut rng = SplitMix64::new(2024);
        let logits: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..7).map(|_| rng.next_range(-3.0, 3.0)).collect())
            .collect();
        let targets: Vec<usize> = (0..5).map(|_| (rng.next_u64() % 7) as usize).collect();
        let b = batch(logits.clone(), targets.clone());
        // Long-form oracle: direct probability ratio, no max-subtraction.
        let mut total = 0.0;
        for (row, &t) in logits.iter().zip(&targets) {
            let z: f64 = row.iter().map(|l| l.exp()).sum();
            total += -(row[t].exp() / z).ln();
        }
        assert!((cross_entropy(&b) - total / 5.0).abs() < 1e-12);
    }

    #[test]
    fn batch_validation_rejects_bad_inputs() {
        assert!(matches!(
            TokenBatch::new(vec![], vec![]),
            Err(LossError::EmptyBatch)
        ));
        assert!(matches!(
            TokenBatch::new(vec![vec![0.0]], vec![0, 1]),
            Err(LossError::StepMismatch { .. })
        ));
        assert!(matches!(
            TokenBatch::new(vec![vec![0.0, 0.0], vec![0.0]], vec![0, 0]),
            Err(LossError::RaggedLogits { step: 1, .. })
        ));
        assert!(matches!(
            TokenBatch::new(vec![vec![0.0, f64::NAN]], vec![0]),
            Err(LossError::NonFiniteLogit { step: 0, index: 1 })
        ));
        assert!(matches!(
            TokenBatch::new(vec![vec![0.0, 0.0]], vec![2]),
            Err(LossError::TargetOutOfRange { target: 2, .. })
        ));
    }

    #[test]
    fn analytic_gradient_passes_the_checker() {
        let mut rng = SplitMix64::new(51);
        for case in 0..50 {
            let steps = 1 + (rng.next_u64() % 3) as usize;
            let vocab = 2 + (rng.next_u64() % 5) as usize;
            let logits: Vec<Vec<f64>> = (0..steps)
                .map(|_| (0..vocab).map(|_| rng.next_range(-2.0, 2.0)).collect())
                .collect();
            let targets: Vec<usize> = (0..steps)
                .map(|_| (rng.next_u64() % vocab as u64) as usize)
                .collect();
            let b = batch(logits.clone(), targets.clone());
            let flat_point: Vec<f64> = logits.concat();
            let flat_grad: Vec<f64> = cross_entropy_grad(&b).concat();
            let t = targets.clone();
            let f = move |x: &[f64]| {
                let rows: Vec<Vec<f64>> = x.chunks(vocab).map(<[f64]>::to_vec).collect();
                cross_entropy(&TokenBatch::new(rows, t.clone()).unwrap())
            };
            let err = grad_check(f, &flat_grad, &flat_point, DEFAULT_GRAD_EPS).unwrap();
            assert!(
                err < DEFAULT_GRAD_TOLERANCE,
                "case {case}: gradient error {err}"
            );
        }
    }

    // ==== stream weighting ====

    #[test]
    fn weighted_total_matches_hand_value() {
        assert_eq!(lm_weighted(2.0, 3.0, &LossWeights::default()), 3.02);
    }

    #[test]
    fn zero_weights_collapse_to_one_stream() {
        let audio_only = LossWeights {
            alpha: 0.0,
            beta: 1.0,
            ..LossWeights::default()
        };
        assert_eq!(lm_weighted(2.0, 3.0, &audio_only), 3.0);
        let text_only = LossWeights {
            alpha: 1.0,
            beta: 0.0,
            ..LossWeights::default()
        };
        assert_eq!(lm_weighted(2.0, 3.0, &text_only), 2.0);
    }

    #[test]
    fn lm_total_composes_the_stream_losses() {
        let text = batch(vec![vec![0.0; 4]; 2], vec![0, 2]);
        let audio = batch(vec![vec![1.0, -1.0, 0.5]; 3], vec![1, 0, 2]);
        let w = LossWeights::default();
        let l = lm_total(&text, &audio, &w);
        assert_eq!(l.text, cross_entropy(&text));
        assert_eq!(l.audio, cross_entropy(&audio));
        assert_eq!(l.total, lm_weighted(l.text, l.audio, &w));
    }

    // ==== adversarial losses ====

    #[test]
    fn perfect_discriminator_scores_zero() {
        let t = trace(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]);
        assert_eq!(adv_d(&t).unwrap(), 0.0);
    }

    #[test]
    fn fooled_discriminator_costs_the_generator_nothing() {
        let t = trace(&[0.3, 0.9], &[1.0, 1.0]);
        assert_eq!(adv_g(&t).unwrap(), 0.0);
    }

    #[test]
    fn adversarial_hand_case() {
        let t = trace(&[0.5], &[0.25]);
        assert_eq!(adv_d(&t).unwrap(), 0.3125);
        assert_eq!(adv_g(&t).unwrap(), 0.5625);
    }

    #[test]
    fn score_validation_catches_malformed_traces() {
        let empty = trace(&[], &[]);
        assert!(matches!(adv_d(&empty), Err(LossError::EmptyScores)));
        let lopsided = trace(&[1.0, 1.0], &[0.0]);
        assert!(matches!(
            adv_g(&lopsided),
            Err(LossError::ScoreCountMismatch { real: 2, fake: 1 })
        ));
        let sick = trace(&[f64::NAN], &[0.0]);
        assert!(matches!(
            adv_d(&sick),
            Err(LossError::NonFiniteScore { side: "real", index: 0 })
        ));
    }

    // ==== mel loss ====

    #[test]
    fn identical_spectrograms_cost_zero() {
        let a = spectrogram(vec![vec![0.5, -1.0, 2.0], vec![0.0, 0.25, -0.5]]);
        assert_eq!(mel_loss(&a, &a.clone()).unwrap(), 0.0);
    }

    #[test]
    fn constant_offset_is_the_offset() {
        // Dyadic entries keep `(x + 0.5) - x` exact.
        let real_frames = vec![vec![0.25, -1.5, 2.0], vec![0.0, 0.75, -0.5]];
        let fake_frames: Vec<Vec<f64>> = real_frames
            .iter()
            .map(|r| r.iter().map(|v| v + 0.5).collect())
            .collect();
        let real = spectrogram(real_frames);
        let fake = spectrogram(fake_frames);
        assert_eq!(mel_loss(&real, &fake).unwrap(), 0.5);
    }

    #[test]
    fn random_pair_matches_the_elementwise_oracle() {
        let mut rng = SplitMix64::new(8);
        let mut draw = |frames: usize, bins: usize| -> Vec<Vec<f64>> {
            (0..frames)
                .map(|_| (0..bins).map(|_| rng.next_range(-2.0, 2.0)).collect())
                .collect()
        };
        let r = draw(4, 3);
        let f = draw(4, 3);
        let mut expected = 0.0;
        for (a, b) in r.iter().zip(&f) {
            for (x, y) in a.iter().zip(b) {
                expected += (x - y).abs();
            }
        }
        expected /= 12.0;
        let got = mel_loss(&spectrogram(r), &spectrogram(f)).unwrap();
        assert!((got - expected).abs() < 1e-15);
    }

    #[test]
    fn mel_pair_mismatches_are_rejected() {
        let a = spectrogram(vec![vec![0.0, 0.0]]);
        let b = spectrogram(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(
            mel_loss(&a, &b),
            Err(LossError::MelShapeMismatch {
                real_frames: 1,
                fake_frames: 2,
                ..
            })
        ));
        let other_cfg = MelSpectrogram::from_frames(
            vec![vec![0.0, 0.0]],
            MelConfig {
                mel_bins: 2,
                hop: 128,
                ..MelConfig::default()
            },
        )
        .unwrap();
        assert!(matches!(
            mel_loss(&a, &other_cfg),
            Err(LossError::MelConfigMismatch)
        ));
        let empty = spectrogram(Vec::new());
        assert!(matches!(mel_loss(&empty, &empty), Err(LossError::EmptyMel)));
    }

    #[test]
    fn mel_subgradient_passes_the_checker_away_from_ties() {
        let real_frames = vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        let fake_frames = vec![vec![0.5, -0.75, 0.25], vec![-0.375, 1.0, -0.5]];
        let real = spectrogram(real_frames.clone());
        let fake = spectrogram(fake_frames.clone());
        let analytic: Vec<f64> = mel_loss_grad(&real, &fake).unwrap().concat();
        let flat: Vec<f64> = fake_frames.concat();
        let f = |x: &[f64]| {
            let rows: Vec<Vec<f64>> = x.chunks(3).map(<[f64]>::to_vec).collect();
            mel_loss(&real, &spectrogram(rows)).unwrap()
        };
        let err = grad_check(f, &analytic, &flat, DEFAULT_GRAD_EPS).unwrap();
        assert!(err < DEFAULT_GRAD_TOLERANCE, "subgradient error {err}");
    }

    // ==== feature matching ====

    fn trace_with_features(
        real_features: Vec<Vec<f64>>,
        fake_features: Vec<Vec<f64>>,
    ) -> DiscriminatorTrace {
        DiscriminatorTrace {
            real_scores: vec![1.0],
            fake_scores: vec![0.0],
            real_features,
            fake_features,
        }
    }

    #[test]
    fn identical_features_cost_zero() {
        let layers = vec![vec![0.5, -0.5], vec![1.0, 2.0, 3.0]];
        let t = trace_with_features(layers.clone(), layers);
        assert_eq!(fm_loss(&t).unwrap(), 0.0);
    }

    #[test]
    fn single_layer_hand_case() {
        // |diff| = (0.5, 0.5, 1.0, 0.0): sums to 2 over 4 features.
        let t = trace_with_features(
            vec![vec![1.0, -1.0, 0.5, 2.0]],
            vec![vec![0.5, -0.5, -0.5, 2.0]],
        );
        assert_eq!(fm_loss(&t).unwrap(), 0.5);
    }

    #[test]
    fn random_layers_match_brute_force() {
        let mut rng = SplitMix64::new(61);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.next_range(-1.0, 1.0)).collect()
        };
        let real = vec![draw(2), draw(5), draw(7)];
        let fake = vec![draw(2), draw(5), draw(7)];
        // Brute force accumulates per element, a different summation order.
        let mut expected = 0.0;
        for (r, f) in real.iter().zip(&fake) {
            for (a, b) in r.iter().zip(f) {
                expected += (a - b).abs() / r.len() as f64;
            }
        }
        let t = trace_with_features(real, fake);
        assert!((fm_loss(&t).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn feature_errors_name_the_layer() {
        let t = trace_with_features(
            vec![vec![1.0], vec![1.0, 2.0]],
            vec![vec![1.0], vec![1.0]],
        );
        assert!(matches!(
            fm_loss(&t),
            Err(LossError::LayerShapeMismatch {
                layer: 1,
                real: 2,
                fake: 1
            })
        ));
        let empty_layer = trace_with_features(vec![vec![]], vec![vec![]]);
        assert!(matches!(
            fm_loss(&empty_layer),
            Err(LossError::EmptyLayer { layer: 0 })
        ));
        let lopsided = trace_with_features(vec![vec![1.0]], vec![]);
        assert!(matches!(
            fm_loss(&lopsided),
            Err(LossError::LayerCountMismatch { real: 1, fake: 0 })
        ));
    }

    // ==== vocoder totals ====

    #[test]
    fn all_components_vanish_together() {
        let layers = vec![vec![0.25, 0.5]];
        let t = DiscriminatorTrace {
            real_scores: vec![1.0],
            fake_scores: vec![1.0],
            real_features: layers.clone(),
            fake_features: layers,
        };
        let mel = spectrogram(vec![vec![0.5, 1.0]]);
        let total =
            hifi_generator_total(&[t], &mel, &mel.clone(), &LossWeights::default()).unwrap();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn two_identical_traces_double_the_per_trace_part() {
        let t = DiscriminatorTrace {
            real_scores: vec![0.5],
            fake_scores: vec![0.25],
            real_features: vec![vec![0.5, 1.5]],
            fake_features: vec![vec![0.0, 1.0]],
        };
        let real = spectrogram(vec![vec![0.0, 0.0]]);
        let fake = spectrogram(vec![vec![0.25, 0.75]]);
        let w = LossWeights::default();
        let per_trace = adv_g(&t).unwrap() + w.lambda_fm * fm_loss(&t).unwrap();
        let mel_part = w.lambda_mel * mel_loss(&real, &fake).unwrap();
        let expected = per_trace + per_trace + mel_part;
        let total =
            hifi_generator_total(&[t.clone(), t], &real, &fake, &w).unwrap();
        assert_eq!(total, expected);
    }

    #[test]
    fn constructed_hand_case_totals_exactly() {
        // Per trace: adv_g = (0.5 - 1)^2 = 0.25 and fm = |0.1 - 0.0| = 0.1.
        let t = DiscriminatorTrace {
            real_scores: vec![1.0],
            fake_scores: vec![0.5],
            real_features: vec![vec![0.1]],
            fake_features: vec![vec![0.0]],
        };
        // Mel part: single-entry spectrograms 0.02 apart.
        let real = spectrogram(vec![vec![0.0]]);
        let fake = spectrogram(vec![vec![0.02]]);
        let total = hifi_generator_total(
            &[t.clone(), t],
            &real,
            &fake,
            &LossWeights::default(),
        )
        .unwrap();
        // 2 * (0.25 + 2 * 0.1) + 45 * 0.02
        assert_eq!(total, 1.8);
    }

    #[test]
    fn zero_lambdas_leave_pure_adversarial_loss() {
        let t1 = trace(&[0.9], &[0.4]);
        let t2 = trace(&[0.8], &[0.7]);
        let real = spectrogram(vec![vec![0.0]]);
        let fake = spectrogram(vec![vec![1.0]]);
        let w = LossWeights {
            lambda_fm: 0.0,
            lambda_mel: 0.0,
            ..LossWeights::default()
        };
        let total =
            hifi_generator_total(&[t1.clone(), t2.clone()], &real, &fake, &w).unwrap();
        assert_eq!(total, adv_g(&t1).unwrap() + adv_g(&t2).unwrap());
    }

    #[test]
    fn discriminator_total_sums_every_trace() {
        let ts = [
            trace(&[0.5], &[0.25]),
            trace(&[1.0], &[0.0]),
            trace(&[0.0], &[1.0]),
        ];
        let expected = adv_d(&ts[0]).unwrap() + adv_d(&ts[1]).unwrap() + adv_d(&ts[2]).unwrap();
        assert_eq!(hifi_discriminator_total(&ts).unwrap(), expected);
        assert!(matches!(
            hifi_discriminator_total(&[]),
            Err(LossError::NoTraces)
        ));
        let real = spectrogram(vec![vec![0.0]]);
        assert!(matches!(
            hifi_generator_total(&[], &real, &real.clone(), &LossWeights::default()),
            Err(LossError::NoTraces)
        ));
    }

    // ==== gradient checking ====

    #[test]
    fn quadratic_gradient_error_is_tiny() {
        let mut rng = SplitMix64::new(14);
        let point: Vec<f64> = (0..6).map(|_| rng.next_range(-2.0, 2.0)).collect();
        let analytic: Vec<f64> = point.iter().map(|x| 2.0 * x).collect();
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let err = grad_check(f, &analytic, &point, DEFAULT_GRAD_EPS).unwrap();
        assert!(err < 1e-8, "quadratic error {err}");
    }

    #[test]
    fn doubled_gradient_is_flagged_near_half() {
        // Entries at least 0.5 make max(1, |2 * 2x|) = |4x|, so the relative
        // error of a doubled gradient is exactly 1/2 up to rounding.
        let point = vec![0.5, 0.8, 1.2, 1.5];
        let wrong: Vec<f64> = point.iter().map(|x| 4.0 * x).collect();
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let err = grad_check(f, &wrong, &point, DEFAULT_GRAD_EPS).unwrap();
        assert!((err - 0.5).abs() < 0.01, "detector error {err}");
    }

    #[test]
    fn grad_check_rejects_bad_inputs() {
        let f = |x: &[f64]| x.iter().sum::<f64>();
        assert!(matches!(
            grad_check(f, &[1.0], &[0.0], 0.0),
            Err(LossError::NonPositiveEps { .. })
        ));
        assert!(matches!(
            grad_check(f, &[1.0, 1.0], &[0.0], 1e-4),
            Err(LossError::GradShapeMismatch { .. })
        ));
        assert!(matches!(
            grad_check(f, &[], &[], 1e-4),
            Err(LossError::EmptyPoint)
        ));
        let sick = |_: &[f64]| f64::NAN;
        assert!(matches!(
            grad_check(sick, &[0.0], &[0.0], 1e-4),
            Err(LossError::NonFiniteEval { coordinate: 0 })
        ));
    }

    // ==== weights config ====

    #[test]
    fn weight_files_overlay_the_defaults() {
        let kv = KvConfig::parse("alpha = 0.02\nlambda_mel = 10\n").unwrap();
        let w = LossWeights::from_kv(&kv).unwrap();
        assert_eq!(w.alpha, 0.02);
        assert_eq!(w.beta, DEFAULT_BETA);
        assert_eq!(w.lambda_fm, DEFAULT_LAMBDA_FM);
        assert_eq!(w.lambda_mel, 10.0);
    }

    #[test]
    fn bad_weight_configs_are_rejected() {
        let unknown = KvConfig::parse("gamma = 1\n").unwrap();
        assert!(matches!(
            LossWeights::from_kv(&unknown),
            Err(LossError::Config(_))
        ));
        let negative = KvConfig::parse("alpha = -1\n").unwrap();
        assert!(matches!(
            LossWeights::from_kv(&negative),
            Err(LossError::InvalidWeights(_))
        ));
        assert!(LossWeights::default().validate().is_ok());
    }

    // ==== trace files ====

    #[test]
    fn trace_lines_round_trip() {
        let traces = vec![
            DiscriminatorTrace {
                real_scores: vec![0.5, 1.0],
                fake_scores: vec![0.25, 0.0],
                real_features: vec![vec![0.5], vec![1.0, 2.0]],
                fake_features: vec![vec![0.0], vec![1.0, 1.5]],
            },
            trace(&[1.0], &[0.0]),
        ];
        let text = traces_to_string(&traces);
        assert_eq!(parse_traces(&text).unwrap(), traces);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "{\"real\":[1.0],\"fake\":[0.0]}\nnot json\n";
        match parse_traces(text) {
            Err(LossError::Line { line: 2, .. }) => {}
            other => panic!("expected a line-2 error, got {other:?}"),
        }
        // Structurally valid JSON that fails trace validation.
        let text = "{\"real\":[1.0,0.5],\"fake\":[0.0]}\n";
        match parse_traces(text) {
            Err(LossError::Line { line: 1, detail }) => {
                assert!(detail.contains("real scores"), "detail: {detail}");
            }
            other => panic!("expected a line-1 error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_trace_keys_are_rejected() {
        let text = "{\"real\":[1.0],\"fake\":[0.0],\"bogus\":3}\n";
        assert!(matches!(
            parse_traces(text),
            Err(LossError::Line { line: 1, .. })
        ));
    }

    #[test]
    fn absent_features_mean_no_feature_matching() {
        let text = "{\"real\":[1.0],\"fake\":[0.5]}\n";
        let traces = parse_traces(text).unwrap();
        assert_eq!(fm_loss(&traces[0]).unwrap(), 0.0);
        assert_eq!(adv_g(&traces[0]).unwrap(), 0.25);
    }
}
