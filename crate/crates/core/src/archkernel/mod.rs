//! Toy-scale architecture kernel: exact, dependency-light linear algebra for
//! the synthesizer's moving parts — multi-head attention, perceiver-style
//! resampling, vector-quantization assignment, the model-input concatenation
//! layout, additive vocoder conditioning, token sampling, and the speaker
//! prompt-span policy.
//!
//! Nothing here is learned or trained. Every operation is a pure function
//! over immutable matrices so batches can be processed data-parallel, and all
//! randomness flows through a caller-owned [`crate::rng::SplitMix64`] so test
//! vectors are portable and exact.

use crate::metrics::emb1::Emb1Error;
use crate::rng::SplitMix64;
use thiserror::Error;

pub mod attention;
pub mod matrix;
pub mod sampling;

pub use attention::{attention, perceiver_resample, softmax_rows, AttentionWeights};
pub use matrix::Matrix;
pub use sampling::{sample_token, sampling_distribution, SamplingConfig};

/// Conditioning-encoder depth used as a default by callers that stack
/// attention blocks; nothing in this module consumes it directly.
pub const DEFAULT_CONDITIONING_LAYERS: usize = 6;

// ==== errors =================================================================

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("matrix of {rows}x{cols} needs {} entries, got {len}", .rows * .cols)]
    BadShape { rows: usize, cols: usize, len: usize },
    #[error("non-finite entry at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{0}")]
    Dimension(String),
    #[error("codebook rows {first} and {second} are identical")]
    DuplicateCode { first: usize, second: usize },
    #[error("logits must be non-empty")]
    EmptyLogits,
    #[error("non-finite logit at index {index}")]
    NonFiniteLogit { index: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("clip duration must be positive, got {duration_s}")]
    NonPositiveDuration { duration_s: f64 },
    #[error("embedding fixture: {0}")]
    Emb1(#[from] Emb1Error),
}

// ==== vector quantization ====================================================

/// A set of pairwise-distinct code vectors, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    codes: Matrix,
}

impl Codebook {
    pub fn new(codes: Matrix) -> Result<Self, KernelError> {
        for a in 0..codes.rows() {
            for b in (a + 1)..codes.rows() {
                if codes.row(a) == codes.row(b) {
                    return Err(KernelError::DuplicateCode { first: a, second: b });
                }
            }
        }
        Ok(Self { codes })
    }

    pub fn codes(&self) -> &Matrix {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        false // a Matrix always has at least one row
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }
}

/// Nearest-code index for every frame under squared Euclidean distance.
/// The scan uses strict `<` in ascending index order, so a distance tie
/// resolves to the lowest index.
pub fn vq_assign(frames: &Matrix, codebook: &Codebook) -> Result<Vec<usize>, KernelError> {
    if frames.cols() != codebook.dim() {
        return Err(KernelError::Dimension(format!(
            "frame dim {} != codebook dim {}",
            frames.cols(),
            codebook.dim()
        )));
    }
    let mut indices = Vec::with_capacity(frames.rows());
    for f in 0..frames.rows() {
        let frame = frames.row(f);
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for c in 0..codebook.len() {
            let dist: f64 = frame
                .iter()
                .zip(codebook.codes.row(c))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            if dist < best_dist {
                best = c;
                best_dist = dist;
            }
        }
        indices.push(best);
    }
    Ok(indices)
}

// ==== model input layout =====================================================

/// Row-wise concatenation `[speaker prompt; text; audio]` with enough
/// bookkeeping to slice each segment back out exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LlmInput {
    matrix: Matrix,
    speaker_rows: usize,
    text_rows: usize,
    audio_rows: usize,
}

impl LlmInput {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.speaker_rows + self.text_rows + self.audio_rows
    }

    /// Starting row of each segment: (speaker, text, audio).
    pub fn offsets(&self) -> (usize, usize, usize) {
        (
            0,
            self.speaker_rows,
            self.speaker_rows + self.text_rows,
        )
    }

    pub fn speaker(&self) -> Matrix {
        self.matrix
            .slice_rows(0..self.speaker_rows)
            .expect("speaker segment is non-empty by construction")
    }

    pub fn text(&self) -> Matrix {
        let (_, start, end) = self.offsets();
        self.matrix
            .slice_rows(start..end)
            .expect("text segment is non-empty by construction")
    }

    /// The audio segment, absent in the inference layout.
    pub fn audio(&self) -> Option<Matrix> {
        if self.audio_rows == 0 {
            return None;
        }
        let (_, _, start) = self.offsets();
        Some(
            self.matrix
                .slice_rows(start..start + self.audio_rows)
                .expect("audio segment bounds are internal"),
        )
    }
}

/// Assemble the model input: speaker prompt rows, then text rows, then —
/// when training — audio rows. At inference `y_e` is absent and the layout
/// is just speaker plus text.
pub fn build_llm_input(
    s_p: &Matrix,
    t_e: &Matrix,
    y_e: Option<&Matrix>,
) -> Result<LlmInput, KernelError> {
    let mut parts = vec![s_p, t_e];
    if let Some(y) = y_e {
        parts.push(y);
    }
    let matrix = Matrix::concat_rows(&parts)?;
    Ok(LlmInput {
        matrix,
        speaker_rows: s_p.rows(),
        text_rows: t_e.rows(),
        audio_rows: y_e.map_or(0, Matrix::rows),
    })
}

// ==== vocoder conditioning ===================================================

/// Resize `speaker` (L rows) to `h_y`'s row count P by endpoint-aligned
/// linear interpolation along the row axis, then add elementwise.
///
/// Output row `i` samples source position `i·(L−1)/(P−1)` (for P == 1, the
/// center `(L−1)/2`), so the first and last speaker rows always map to the
/// first and last output rows. When L == P every position is integral and
/// the resize is an exact identity, making the whole operation plain
/// addition.
pub fn hifi_combine(h_y: &Matrix, speaker: &Matrix) -> Result<Matrix, KernelError> {
    if h_y.cols() != speaker.cols() {
        return Err(KernelError::Dimension(format!(
            "width mismatch: {} vs {}",
            h_y.cols(),
            speaker.cols()
        )));
    }
    let p = h_y.rows();
    let l = speaker.rows();
    let d = h_y.cols();
    let mut data = Vec::with_capacity(p * d);
    for i in 0..p {
        let pos = if p == 1 {
            (l - 1) as f64 / 2.0
        } else {
            i as f64 * (l - 1) as f64 / (p - 1) as f64
        };
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let hi = if frac > 0.0 { lo + 1 } else { lo };
        for c in 0..d {
            let s = if frac > 0.0 {
                let a = speaker.get(lo, c);
                let b = speaker.get(hi, c);
                a + frac * (b - a)
            } else {
                speaker.get(lo, c)
            };
            data.push(h_y.get(i, c) + s);
        }
    }
    Matrix::new(p, d, data)
}

// ==== speaker prompt policy ==================================================

pub const DEFAULT_MIN_PROMPT_S: f64 = 1.0;
pub const DEFAULT_MAX_PROMPT_S: f64 = 6.0;
pub const DEFAULT_SHORT_CLIP_FRACTION: f64 = 0.5;

/// How much of a reference clip to reserve as the speaker prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptPolicy {
    pub min_prompt_s: f64,
    pub max_prompt_s: f64,
    /// Fraction of the clip used when it is shorter than `min_prompt_s`.
    pub short_clip_fraction: f64,
}

impl Default for PromptPolicy {
    fn default() -> Self {
        Self {
            min_prompt_s: DEFAULT_MIN_PROMPT_S,
            max_prompt_s: DEFAULT_MAX_PROMPT_S,
            short_clip_fraction: DEFAULT_SHORT_CLIP_FRACTION,
        }
    }
}

impl PromptPolicy {
    pub fn validate(&self) -> Result<(), KernelError> {
        if !(self.min_prompt_s.is_finite()
            && self.max_prompt_s.is_finite()
            && self.min_prompt_s > 0.0
            && self.min_prompt_s < self.max_prompt_s)
        {
            return Err(KernelError::InvalidConfig(format!(
                "prompt bounds must satisfy 0 < min < max, got [{}, {}]",
                self.min_prompt_s, self.max_prompt_s
            )));
        }
        if !(self.short_clip_fraction.is_finite()
            && self.short_clip_fraction > 0.0
            && self.short_clip_fraction < 1.0)
        {
            return Err(KernelError::InvalidConfig(format!(
                "short_clip_fraction must lie in (0, 1), got {}",
                self.short_clip_fraction
            )));
        }
        Ok(())
    }
}

/// A prompt window inside a clip, in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptSpan {
    pub start_s: f64,
    pub len_s: f64,
}

/// Choose the prompt span for one clip.
///
/// Clips shorter than the policy minimum surrender a fixed fraction of their
/// length (start still drawn uniformly). Otherwise the length is drawn
/// uniformly from `[min, min(max, duration)]` and the start uniformly from
/// the positions where the span fits. The length is always drawn before the
/// start, so a given generator state yields one well-defined span.
pub fn select_prompt_span(
    clip_duration_s: f64,
    policy: &PromptPolicy,
    rng: &mut SplitMix64,
) -> Result<PromptSpan, KernelError> {
    policy.validate()?;
    if !clip_duration_s.is_finite() || clip_duration_s <= 0.0 {
        return Err(KernelError::NonPositiveDuration {
            duration_s: clip_duration_s,
        });
    }
    let len_s = if clip_duration_s < policy.min_prompt_s {
        policy.short_clip_fraction * clip_duration_s
    } else {
        rng.next_range(
            policy.min_prompt_s,
            policy.max_prompt_s.min(clip_duration_s),
        )
    };
    let start_s = rng.next_range(0.0, clip_duration_s - len_s);
    Ok(PromptSpan { start_s, len_s })
}
