//! Log-mel spectrograms: Hann-window STFT through a triangular filterbank.
//!
//! The mel scale is the HTK form `2595 * log10(1 + f/700)`; one formula,
//! used everywhere, so tone-placement tests can compute filter centers
//! analytically. Defaults follow common vocoder practice (22050 Hz, 1024-point
//! FFT, hop 256, 80 bins to 8 kHz) and every field can be overridden from a
//! flat key=value config file.

use std::path::Path;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioClip, DspError};
use crate::config::KvConfig;

/// Convert Hz to mel (HTK formula).
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Convert mel back to Hz.
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

/// Spectrogram parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop: usize,
    pub mel_bins: usize,
    pub fmin: f64,
    pub fmax: f64,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            sample_rate: 22050,
            fft_size: 1024,
            hop: 256,
            mel_bins: 80,
            fmin: 0.0,
            fmax: 8000.0,
            log_floor: 1e-5,
        }
    }
}

const MEL_CONFIG_KEYS: &[&str] = &[
    "sample_rate",
    "fft_size",
    "hop",
    "mel_bins",
    "fmin",
    "fmax",
    "log_floor",
];

impl MelConfig {
    /// Check the structural invariants.
    pub fn validate(&self) -> Result<(), DspError> {
        let fail = |detail: &str| Err(DspError::InvalidConfig(detail.to_string()));
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive");
        }
        if self.fft_size == 0 || self.hop == 0 {
            return fail("fft_size and hop must be positive");
        }
        if self.hop > self.fft_size {
            return fail("hop must not exceed fft_size");
        }
        if self.mel_bins == 0 {
            return fail("mel_bins must be at least 1");
        }
        if !(self.fmin >= 0.0 && self.fmin < self.fmax) {
            return fail("need 0 <= fmin < fmax");
        }
        if self.fmax > f64::from(self.sample_rate) / 2.0 {
            return fail("fmax must not exceed the Nyquist frequency");
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail("log_floor must be a positive finite value");
        }
        Ok(())
    }

    /// Overlay values from a parsed config onto the defaults. Unknown keys
    /// are rejected.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, DspError> {
        kv.reject_unknown(MEL_CONFIG_KEYS)?;
        let mut cfg = Self::default();
        if let Some(v) = kv.get_u32("sample_rate")? {
            cfg.sample_rate = v;
        }
        if let Some(v) = kv.get_usize("fft_size")? {
            cfg.fft_size = v;
        }
        if let Some(v) = kv.get_usize("hop")? {
            cfg.hop = v;
        }
        if let Some(v) = kv.get_usize("mel_bins")? {
            cfg.mel_bins = v;
        }
        if let Some(v) = kv.get_f64("fmin")? {
            cfg.fmin = v;
        }
        if let Some(v) = kv.get_f64("fmax")? {
            cfg.fmax = v;
        }
        if let Some(v) = kv.get_f64("log_floor")? {
            cfg.log_floor = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, DspError> {
        Self::from_kv(&KvConfig::from_file(path)?)
    }

    /// Number of one-sided spectrum bins: fft_size/2 + 1.
    pub fn spectrum_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Time-major matrix of log-mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    frames: Vec<Vec<f64>>,
    config: MelConfig,
}

impl MelSpectrogram {
    /// Wrap precomputed frames, checking width uniformity, finiteness, and
    /// the log floor.
    pub fn from_frames(frames: Vec<Vec<f64>>, config: MelConfig) -> Result<Self, DspError> {
        config.validate()?;
        let floor = config.log_floor.ln();
        for row in &frames {
            if row.len() != config.mel_bins {
                return Err(DspError::InvalidConfig(format!(
                    "frame of width {} does not match mel_bins {}",
                    row.len(),
                    config.mel_bins
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < floor) {
                return Err(DspError::InvalidConfig(
                    "mel entries must be finite and at least ln(log_floor)".to_string(),
                ));
            }
        }
        Ok(Self { frames, config })
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn mel_bins(&self) -> usize {
        self.config.mel_bins
    }

    pub fn config(&self) -> &MelConfig {
        &self.config
    }
}

/// Triangular mel filterbank: `mel_bins` rows over the one-sided spectrum.
///
/// Band edges are `mel_bins + 2` equally spaced points on the mel axis
/// between `fmin` and `fmax`; row m rises linearly from point m to point m+1
/// and falls to point m+2, so a row overlaps only its immediate neighbours.
pub fn mel_filterbank(cfg: &MelConfig) -> Result<Vec<Vec<f64>>, DspError> {
    cfg.validate()?;
    let mel_lo = hz_to_mel(cfg.fmin);
    let mel_hi = hz_to_mel(cfg.fmax);
    let n_points = cfg.mel_bins + 2;
    let edges_hz: Vec<f64> = (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect();

    let bins = cfg.spectrum_bins();
    let bin_hz = f64::from(cfg.sample_rate) / cfg.fft_size as f64;
    let mut bank = Vec::with_capacity(cfg.mel_bins);
    for m in 0..cfg.mel_bins {
        let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        let mut row = vec![0.0; bins];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            if f > left && f < center {
                *w = (f - left) / (center - left);
            } else if f == center {
                *w = 1.0;
            } else if f > center && f < right {
                *w = (right - f) / (right - center);
            }
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Compute the log-mel spectrogram of a clip.
///
/// Frames start at multiples of `hop` and each covers `fft_size` samples
/// under a periodic Hann window; frame count is
/// `T = 1 + floor((len - fft_size)/hop)`. The tail beyond the last full
/// window is at most `hop - 1` samples — below the zero-padding cutoff of one
/// hop — so every emitted frame is a full window. Each frame's magnitude
/// spectrum passes through the filterbank and then `ln(max(e, log_floor))`.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &MelConfig) -> Result<MelSpectrogram, DspError> {
    cfg.validate()?;
    if clip.sample_rate() != cfg.sample_rate {
        return Err(DspError::SampleRateMismatch {
            clip: clip.sample_rate(),
            config: cfg.sample_rate,
        });
    }
    let samples = clip.samples();
    if samples.len() < cfg.fft_size {
        return Err(DspError::ClipTooShort {
            got: samples.len(),
            needed: cfg.fft_size,
        });
    }

    let n = cfg.fft_size;
    let window: Vec<f64> = (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect();
    let bank = mel_filterbank(cfg)?;
    let floor = cfg.log_floor;

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buffer = vec![Complex::new(0.0, 0.0); n];

    let t_frames = 1 + (samples.len() - n) / cfg.hop;
    let bins = cfg.spectrum_bins();
    let mut frames = Vec::with_capacity(t_frames);
    for t in 0..t_frames {
        let start = t * cfg.hop;
        for (i, slot) in buffer.iter_mut().enumerate() {
            *slot = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process_with_scratch(&mut buffer, &mut scratch);
        let magnitudes: Vec<f64> = buffer[..bins].iter().map(|c| c.norm()).collect();
        let row: Vec<f64> = bank
            .iter()
            .map(|filter| {
                let energy: f64 = filter
                    .iter()
                    .zip(&magnitudes)
                    .map(|(w, m)| w * m)
                    .sum();
                energy.max(floor).ln()
            })
            .collect();
        frames.push(row);
    }
    Ok(MelSpectrogram {
        frames,
        config: cfg.clone(),
    })
}
