//! Deterministic generation of the self-contained demo tree.
//!
//! `forge make-fixtures` writes everything the other subcommands need to
//! run fully offline: synthetic WAV tones with controlled silence, a
//! six-record manifest that trips every filter rule exactly once, an
//! evaluation pairs file with embeddings, discriminator traces, and the
//! config files spelling out the built-in defaults. Every byte is a pure
//! function of the tree layout — no fixture depends on the seed — so two
//! runs with any seeds produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use forge_core::corpus::manifest::manifest_to_string;
use forge_core::corpus::CorpusRecord;
use forge_core::dsp::encode_wav_pcm16;
use forge_core::losses::{traces_to_string, DiscriminatorTrace};
use forge_core::metrics::pairs::PairRecord;
use forge_core::metrics::{emb1, EmbeddingSequence};

/// Sample rate shared by every generated clip.
pub const SAMPLE_RATE: u32 = 22050;

/// Samples per silence-analysis frame at the default 25 ms window:
/// floor(22050 * 25 / 1000).
const FRAME: usize = 551;

const TONE_HZ: f64 = 220.0;
const TONE_AMPLITUDE: f64 = 0.5;

// ==== audio synthesis ========================================================

/// A sine tone with every sample from `mute_from` onward forced to zero.
/// Muting on frame boundaries gives clips an exact silence ratio.
fn tone_muted_from(len: usize, mute_from: usize) -> Vec<f64> {
    let step = std::f64::consts::TAU * TONE_HZ / f64::from(SAMPLE_RATE);
    (0..len)
        .map(|i| {
            if i >= mute_from {
                0.0
            } else {
                TONE_AMPLITUDE * (step * i as f64).sin()
            }
        })
        .collect()
}

fn tone(len: usize) -> Vec<f64> {
    tone_muted_from(len, len)
}

// ==== records ================================================================

fn record(id: &str, file: &str, text: String) -> CorpusRecord {
    CorpusRecord {
        id: id.to_string(),
        audio_path: format!("audio/{file}"),
        text,
        speaker_id: Some("spk-1".to_string()),
        word_timings: None,
        // Left unannotated on purpose: filtering must probe the audio.
        duration_s: None,
        silence_ratio: None,
    }
}

/// The six-record decision table. Each record fails exactly one screening
/// rule — in rule order — except the last, which passes them all:
///
/// - `dur-short`: 8 820 samples = 0.4 s, under the 0.5 s minimum
/// - `dur-long`: 253 575 samples = 11.5 s, over the 11 s maximum
/// - `text-long`: 201 characters against the 200 ceiling
/// - `silent`: 40 frames, 16 of them muted — silence ratio 0.4 > 0.35
/// - `ratio-low`: 25 characters over 5 s — 5 chars/s, below the [6, 25] band
/// - `pass`: 48 characters over 6 s — 8 chars/s, inside the band
fn manifest_records() -> Vec<CorpusRecord> {
    vec![
        record("dur-short", "dur_short.wav", "আ".to_string()),
        record("dur-long", "dur_long.wav", "আমি আছি".to_string()),
        record("text-long", "text_long.wav", "আ".repeat(201)),
        record("silent", "silent.wav", "আমি".to_string()),
        record("ratio-low", "ratio_low.wav", format!("{}আ", "আমি ".repeat(6))),
        record("pass", "pass.wav", format!("{}আমি।", "আমি ".repeat(11))),
    ]
}

fn clips() -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("dur_short.wav", tone(8_820)),
        ("dur_long.wav", tone(253_575)),
        ("text_long.wav", tone(132_300)),
        // 40 frames total, the last 16 muted: silence ratio 16/40 = 0.4.
        ("silent.wav", tone_muted_from(40 * FRAME, 24 * FRAME)),
        // 200 frames, the last 20 muted: silence ratio 0.1, kept below the
        // threshold so the ratio rule is the one that fires.
        ("ratio_low.wav", tone_muted_from(110_250, 180 * FRAME)),
        ("pass.wav", tone(132_300)),
        // Pair-evaluation clips: durations 2 s and 4 s.
        ("len_2s.wav", tone(44_100)),
        ("len_4s.wav", tone(88_200)),
    ]
}

fn pair_records() -> Vec<PairRecord> {
    vec![
        PairRecord {
            id: "text-match".to_string(),
            hyp: Some("আমি আছি".to_string()),
            reference: Some("আমি আছি".to_string()),
            ..PairRecord::default()
        },
        PairRecord {
            id: "text-off".to_string(),
            hyp: Some("আমি আছ".to_string()),
            reference: Some("আমি আছি".to_string()),
            ..PairRecord::default()
        },
        PairRecord {
            id: "halved".to_string(),
            audio_ref: Some("audio/len_2s.wav".to_string()),
            audio_syn: Some("audio/len_4s.wav".to_string()),
            ..PairRecord::default()
        },
        PairRecord {
            id: "emb-same".to_string(),
            emb_ref: Some("emb/voice_ref.emb".to_string()),
            emb_syn: Some("emb/voice_same.emb".to_string()),
            ..PairRecord::default()
        },
        PairRecord {
            id: "voice".to_string(),
            audio_ref: Some("audio/pass.wav".to_string()),
            audio_syn: Some("audio/pass.wav".to_string()),
            ..PairRecord::default()
        },
        PairRecord {
            id: "rated".to_string(),
            ratings: Some(vec![4.0, 4.5, 5.0]),
            ..PairRecord::default()
        },
    ]
}

fn traces() -> Vec<DiscriminatorTrace> {
    vec![
        DiscriminatorTrace {
            real_scores: vec![0.5],
            fake_scores: vec![0.25],
            real_features: vec![vec![0.5]],
            fake_features: vec![vec![0.0]],
        },
        DiscriminatorTrace {
            real_scores: vec![1.0, 0.75],
            fake_scores: vec![0.0, 0.25],
            real_features: Vec::new(),
            fake_features: Vec::new(),
        },
    ]
}

const POLICY_CFG: &str = "\
# Corpus screening thresholds; these values mirror the built-in defaults.
min_duration_s = 0.5
max_duration_s = 11.0
max_text_chars = 200
max_silence_ratio = 0.35
ratio_low = 6.0
ratio_high = 25.0
require_speaker = false
silence_frame_ms = 25.0
silence_db = -40.0
";

const WEIGHTS_CFG: &str = "\
# Loss mixing weights; these values mirror the built-in defaults.
alpha = 0.01
beta = 1.0
lambda_fm = 2.0
lambda_mel = 45.0
";

// ==== tree writer ============================================================

fn write(path: &Path, bytes: &[u8], written: &mut Vec<PathBuf>) -> Result<(), String> {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    written.push(path.to_path_buf());
    Ok(())
}

/// Write the fixture tree under `out_dir`, returning the files created.
pub fn make_fixtures(out_dir: &Path) -> Result<Vec<PathBuf>, String> {
    for sub in ["audio", "emb"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let mut written = Vec::new();

    for (name, samples) in clips() {
        let path = out_dir.join("audio").join(name);
        write(&path, &encode_wav_pcm16(&samples, SAMPLE_RATE), &mut written)?;
    }

    let voice = EmbeddingSequence::new(vec![vec![
        0.25, -0.5, 1.0, 0.125, -0.25, 0.75, -1.0, 0.5,
    ]])
    .map_err(|e| e.to_string())?;
    for name in ["voice_ref.emb", "voice_same.emb"] {
        let path = out_dir.join("emb").join(name);
        write(&path, &emb1::encode(&voice), &mut written)?;
    }

    write(
        &out_dir.join("manifest.jsonl"),
        manifest_to_string(&manifest_records()).as_bytes(),
        &mut written,
    )?;
    let pairs_text: String = pair_records()
        .iter()
        .map(|p| {
            let mut line = serde_json::to_string(p).expect("pair record serializes");
            line.push('\n');
            line
        })
        .collect();
    write(&out_dir.join("pairs.jsonl"), pairs_text.as_bytes(), &mut written)?;
    write(
        &out_dir.join("traces.jsonl"),
        traces_to_string(&traces()).as_bytes(),
        &mut written,
    )?;
    write(&out_dir.join("policy.cfg"), POLICY_CFG.as_bytes(), &mut written)?;
    write(&out_dir.join("weights.cfg"), WEIGHTS_CFG.as_bytes(), &mut written)?;

    Ok(written)
}

// ==== tests ==================================================================
