//! Objective evaluation metrics: character error rate, speaker-embedding
//! cosine similarity, frame-level speech similarity, duration equality, and
//! mean-opinion-score aggregation.
//!
//! Text is compared over Unicode scalar values after NFC normalization (the
//! normalization form is switchable via [`TextNorm`]): combining vowel signs
//! compose before counting, so scores do not depend on the input's
//! normalization form. Scalar-level, not grapheme-level — the finer,
//! deterministic unit.

pub mod emb1;
pub mod pairs;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::dsp::MelSpectrogram;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("reference text is empty")]
    EmptyReference,
    #[error("durations must be positive and finite")]
    NonPositiveDuration,
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding sequence is empty")]
    EmptySequence,
    #[error("vector {index} has dimension {got}, expected {expected}")]
    RaggedVector {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("vector {index} has a non-finite entry")]
    NonFinite { index: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("{sequence} frame {index} is a zero vector")]
    ZeroFrame {
        sequence: &'static str,
        index: usize,
    },
    #[error("spectrogram has {got} frames; at least 2 are required")]
    TooFewFrames { got: usize },
    #[error("no ratings given")]
    EmptyRatings,
    #[error("rating {index} is {value}, outside [1, 5]")]
    RatingOutOfRange { index: usize, value: f64 },
    #[error("unknown metric {name:?}; expected cer, secs, sbs, de, mos")]
    UnknownMetric { name: String },
    #[error("no metrics selected")]
    NoMetrics,
}

// ==== text metrics ====

/// Text normalization applied before character-level comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TextNorm {
    /// Canonical composition; the default.
    #[default]
    Nfc,
    /// Canonical decomposition.
    Nfd,
    /// No normalization: scalars exactly as given.
    Raw,
}

fn scalars(text: &str, norm: TextNorm) -> Vec<char> {
    match norm {
        TextNorm::Nfc => text.nfc().collect(),
        TextNorm::Nfd => text.nfd().collect(),
        TextNorm::Raw => text.chars().collect(),
    }
}

/// Unit-cost Levenshtein distance over scalar slices.
///
/// Rolling two-row dynamic program; O(min-length) space.
fn levenshtein(a: &[char], b: &[char]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut prev: Vec<usize> = (0..=short.len()).collect();
    let mut curr = vec![0usize; short.len() + 1];
    for (i, &lc) in long.iter().enumerate() {
        curr[0] = i + 1;
        for (j, &sc) in short.iter().enumerate() {
            let substitute = prev[j] + usize::from(lc != sc);
            curr[j + 1] = substitute.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[short.len()]
}

/// Character error rate: edit distance over reference length.
///
/// Substitutions, deletions, and insertions all cost one; the result is not
/// clipped, so a hypothesis much longer than the reference can exceed 1.
pub fn cer(hypothesis: &str, reference: &str) -> Result<f64, MetricError> {
    cer_with_norm(hypothesis, reference, TextNorm::Nfc)
}

/// [`cer`] under an explicit normalization form.
pub fn cer_with_norm(
    hypothesis: &str,
    reference: &str,
    norm: TextNorm,
) -> Result<f64, MetricError> {
    let r = scalars(reference, norm);
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let h = scalars(hypothesis, norm);
    Ok(levenshtein(&h, &r) as f64 / r.len() as f64)
}

// ==== duration ====

/// `1 / max(a/b, b/a)`: 1 for identical durations, falling toward 0 as they
/// diverge. Symmetric and scale-invariant.
pub fn duration_equality(a: f64, b: f64) -> Result<f64, MetricError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(MetricError::NonPositiveDuration);
    }
    Ok(1.0 / (a / b).max(b / a))
}

// ==== embedding metrics ====

/// Ordered list of equal-dimension vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSequence {
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

impl EmbeddingSequence {
    /// Wrap vectors, checking non-emptiness, uniform dimension, finiteness.
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let Some(first) = vectors.first() else {
            return Err(MetricError::EmptySequence);
        };
        let dim = first.len();
        if dim == 0 {
            return Err(MetricError::RaggedVector {
                index: 0,
                got: 0,
                expected: 1,
            });
        }
        for (index, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(MetricError::RaggedVector {
                    index,
                    got: v.len(),
                    expected: dim,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MetricError::NonFinite { index });
            }
        }
        Ok(Self { vectors, dim })
    }

    pub fn single(vector: Vec<f64>) -> Result<Self, MetricError> {
        Self::new(vec![vector])
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-emptiness is a construction invariant
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64], na: f64, nb: f64) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Speaker-embedding cosine similarity, clamped to [-1, 1] against rounding.
pub fn secs(e_ref: &[f64], e_syn: &[f64]) -> Result<f64, MetricError> {
    if e_ref.len() != e_syn.len() {
        return Err(MetricError::DimensionMismatch {
            left: e_ref.len(),
            right: e_syn.len(),
        });
    }
    let (na, nb) = (norm(e_ref), norm(e_syn));
    if na == 0.0 || nb == 0.0 || e_ref.is_empty() {
        return Err(MetricError::ZeroVector);
    }
    Ok(cosine(e_ref, e_syn, na, nb))
}

/// Mean over generated frames of the maximum cosine similarity against any
/// reference frame. Deliberately asymmetric: the average runs over `gen`,
/// the max over `reference`.
///
/// A zero vector on either side is an error (real encoders never emit exact
/// zeros; one in a pipeline is a bug worth surfacing).
pub fn speech_bert_score(
    gen: &EmbeddingSequence,
    reference: &EmbeddingSequence,
) -> Result<f64, MetricError> {
    if gen.dim() != reference.dim() {
        return Err(MetricError::DimensionMismatch {
            left: gen.dim(),
            right: reference.dim(),
        });
    }
    let gen_norms: Vec<f64> = gen.vectors().iter().map(|v| norm(v)).collect();
    if let Some(index) = gen_norms.iter().position(|&n| n == 0.0) {
        return Err(MetricError::ZeroFrame {
            sequence: "generated",
            index,
        });
    }
    let ref_norms: Vec<f64> = reference.vectors().iter().map(|v| norm(v)).collect();
    if let Some(index) = ref_norms.iter().position(|&n| n == 0.0) {
        return Err(MetricError::ZeroFrame {
            sequence: "reference",
            index,
        });
    }

    let mut total = 0.0;
    for (g, ng) in gen.vectors().iter().zip(&gen_norms) {
        let best = reference
            .vectors()
            .iter()
            .zip(&ref_norms)
            .map(|(r, nr)| cosine(g, r, *ng, *nr))
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    Ok(total / gen.len() as f64)
}

/// Stand-in speaker embedding when no external encoder output is available:
/// per-bin mean over time concatenated with per-bin population standard
/// deviation, dimension `2 * mel_bins`. Order-invariant over frames.
pub fn baseline_speaker_embedding(mel: &MelSpectrogram) -> Result<Vec<f64>, MetricError> {
    let t = mel.num_frames();
    if t < 2 {
        return Err(MetricError::TooFewFrames { got: t });
    }
    let bins = mel.mel_bins();
    let mut mean = vec![0.0; bins];
    for frame in mel.frames() {
        for (m, v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t as f64;
    }
    let mut var = vec![0.0; bins];
    for frame in mel.frames() {
        for ((s, v), m) in var.iter_mut().zip(frame).zip(&mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let mut out = mean;
    out.extend(var.into_iter().map(|s| (s / t as f64).sqrt()));
    Ok(out)
}

// ==== subjective scores ====

/// Arithmetic mean of Likert ratings; fractional ratings allowed.
pub fn aggregate_mos(ratings: &[f64]) -> Result<f64, MetricError> {
    if ratings.is_empty() {
        return Err(MetricError::EmptyRatings);
    }
    for (index, &value) in ratings.iter().enumerate() {
        if !(1.0..=5.0).contains(&value) {
            return Err(MetricError::RatingOutOfRange { index, value });
        }
    }
    Ok(ratings.iter().sum::<f64>() / ratings.len() as f64)
}

// ==== reports ====

/// Per-pair metric values; a field is absent when its inputs were absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub secs: Option<f64>,
    #[serde(rename = "sbs", skip_serializing_if = "Option::is_none", default)]
    pub speech_bert: Option<f64>,
    #[serde(rename = "de", skip_serializing_if = "Option::is_none", default)]
    pub duration_equality: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub smos: Option<f64>,
}
