//! Audio substrate: WAV decoding, mel spectrograms, silence measurement.
//!
//! Everything downstream of raw audio flows through this module: corpus
//! filtering reads durations and silence ratios from [`AudioClip`]s, the mel
//! loss and the baseline speaker embedding consume [`MelSpectrogram`]s. All
//! operations are pure functions over immutable values, so batch callers can
//! parallelize freely.

pub mod mel;
pub mod wav;

pub use mel::{mel_filterbank, mel_spectrogram, MelConfig, MelSpectrogram};
pub use wav::{decode_wav, encode_wav_pcm16};

use thiserror::Error;

/// Default non-overlapping analysis frame for silence measurement.
pub const DEFAULT_SILENCE_FRAME_MS: f64 = 25.0;
/// Default silence threshold relative to the loudest frame, in dB.
pub const DEFAULT_SILENCE_DB: f64 = -40.0;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("wav parse error at byte {offset}: {detail}")]
    Wav { offset: usize, detail: String },
    #[error("empty clip")]
    EmptyClip,
    #[error("clip has {got} samples but at least {needed} are required")]
    ClipTooShort { got: usize, needed: usize },
    #[error("sample rate must be positive")]
    ZeroSampleRate,
    #[error("sample {index} is not finite")]
    NonFiniteSample { index: usize },
    #[error("sample {index} is outside [-1, 1]")]
    SampleOutOfRange { index: usize },
    #[error("clip sample rate {clip} does not match config sample rate {config}")]
    SampleRateMismatch { clip: u32, config: u32 },
    #[error("invalid mel config: {0}")]
    InvalidConfig(String),
    #[error("a {frame_ms} ms frame holds no full sample at {sample_rate} Hz")]
    FrameTooShort { frame_ms: f64, sample_rate: u32 },
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

/// Decoded mono audio: amplitudes in [-1, 1] at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Build a clip, checking that every sample is finite and in [-1, 1].
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, DspError> {
        if sample_rate == 0 {
            return Err(DspError::ZeroSampleRate);
        }
        for (index, &s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(DspError::NonFiniteSample { index });
            }
            if !(-1.0..=1.0).contains(&s) {
                return Err(DspError::SampleOutOfRange { index });
            }
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Exact duration: sample count over sample rate.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Fraction of the clip that is silent, in [0, 1].
///
/// The clip is cut into non-overlapping frames of
/// `floor(sample_rate * frame_ms / 1000)` samples (a trailing partial frame
/// is ignored). A frame counts as silent when its RMS falls below the loudest
/// frame's RMS scaled by `10^(rel_db_threshold / 20)`. The threshold is
/// relative to the clip's own peak, so the result is invariant under global
/// gain changes; an all-zero clip is 1.0 by definition.
pub fn silence_ratio(
    clip: &AudioClip,
    frame_ms: f64,
    rel_db_threshold: f64,
) -> Result<f64, DspError> {
    if clip.samples.is_empty() {
        return Err(DspError::EmptyClip);
    }
    let frame_len = (f64::from(clip.sample_rate) * frame_ms / 1000.0).floor() as usize;
    if frame_len == 0 {
        return Err(DspError::FrameTooShort {
            frame_ms,
            sample_rate: clip.sample_rate,
        });
    }
    let n_frames = clip.samples.len() / frame_len;
    if n_frames == 0 {
        return Err(DspError::ClipTooShort {
            got: clip.samples.len(),
            needed: frame_len,
        });
    }

    let rms: Vec<f64> = (0..n_frames)
        .map(|t| {
            let frame = &clip.samples[t * frame_len..(t + 1) * frame_len];
            let energy: f64 = frame.iter().map(|s| s * s).sum();
            (energy / frame_len as f64).sqrt()
        })
        .collect();
    let peak = rms.iter().cloned().fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return Ok(1.0);
    }
    let threshold = peak * 10.0_f64.powf(rel_db_threshold / 20.0);
    let silent = rms.iter().filter(|&&r| r < threshold).count();
    Ok(silent as f64 / n_frames as f64)
}
