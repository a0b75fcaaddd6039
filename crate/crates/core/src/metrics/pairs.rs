//! Batch evaluation of hypothesis/reference pairs.
//!
//! A pairs file is line-delimited JSON; each line names whatever inputs the
//! pair has: texts (`hyp`, `ref`), audio paths (`audio_ref`, `audio_syn`),
//! embedding paths (`emb_ref`, `emb_syn`), listener `ratings`. Each requested
//! metric is computed when its inputs are present and skipped silently when
//! they are not; per-pair failures (unreadable files, zero vectors, ...) land
//! in that pair's `error` field and never abort the batch.
//!
//! Speaker similarity and frame similarity prefer embedding files when both
//! sides have one; otherwise, when both audio paths are present, they fall
//! back to the baseline mel-statistics embedding so the toolkit runs without
//! any external encoder.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    aggregate_mos, baseline_speaker_embedding, cer, duration_equality, emb1,
    speech_bert_score, EmbeddingSequence, MetricError, MetricReport,
};
use crate::batch;
use crate::dsp::{decode_wav, mel_spectrogram, AudioClip, MelConfig};

#[derive(Debug, Error)]
pub enum PairsError {
    #[error("pairs line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One evaluation pair; every input beyond `id` is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hyp: Option<String>,
    #[serde(rename = "ref", skip_serializing_if = "Option::is_none", default)]
    pub reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audio_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub audio_syn: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub emb_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub emb_syn: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ratings: Option<Vec<f64>>,
}

/// The metrics selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Cer,
    Secs,
    Sbs,
    De,
    Mos,
}

impl MetricKind {
    /// Parse a comma-separated selection such as `cer,secs,sbs,de`.
    pub fn parse_list(text: &str) -> Result<Vec<MetricKind>, MetricError> {
        let kinds: Vec<MetricKind> = text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "cer" => Ok(MetricKind::Cer),
                "secs" => Ok(MetricKind::Secs),
                "sbs" => Ok(MetricKind::Sbs),
                "de" => Ok(MetricKind::De),
                "mos" => Ok(MetricKind::Mos),
                other => Err(MetricError::UnknownMetric {
                    name: other.to_string(),
                }),
            })
            .collect::<Result<_, _>>()?;
        if kinds.is_empty() {
            return Err(MetricError::NoMetrics);
        }
        Ok(kinds)
    }
}

/// Result line for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub id: String,
    #[serde(flatten)]
    pub report: MetricReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

fn load_clip(base_dir: &Path, rel: &str) -> Result<AudioClip, String> {
    let path = base_dir.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    decode_wav(&bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn baseline_sequence(
    clip: &AudioClip,
    mel_cfg: &MelConfig,
) -> Result<EmbeddingSequence, String> {
    let mel = mel_spectrogram(clip, mel_cfg).map_err(|e| e.to_string())?;
    let embedding = baseline_speaker_embedding(&mel).map_err(|e| e.to_string())?;
    EmbeddingSequence::single(embedding).map_err(|e| e.to_string())
}

/// Evaluate one pair. Relative paths resolve against `base_dir` (normally
/// the pairs file's directory); `mel_cfg` parameterizes the baseline
/// embedding fallback.
pub fn evaluate_pair(
    pair: &PairRecord,
    metrics: &[MetricKind],
    base_dir: &Path,
    mel_cfg: &MelConfig,
) -> PairOutcome {
    let mut report = MetricReport::default();
    let mut errors: Vec<String> = Vec::new();

    if metrics.contains(&MetricKind::Cer) {
        if let (Some(hyp), Some(reference)) = (&pair.hyp, &pair.reference) {
            match cer(hyp, reference) {
                Ok(v) => report.cer = Some(v),
                Err(e) => errors.push(format!("cer: {e}")),
            }
        }
    }

    let want_secs = metrics.contains(&MetricKind::Secs);
    let want_sbs = metrics.contains(&MetricKind::Sbs);
    let want_de = metrics.contains(&MetricKind::De);
    let have_embs = pair.emb_ref.is_some() && pair.emb_syn.is_some();
    let have_audio = pair.audio_ref.is_some() && pair.audio_syn.is_some();
    let need_clips = have_audio && (want_de || ((want_secs || want_sbs) && !have_embs));

    let mut ref_clip: Option<AudioClip> = None;
    let mut syn_clip: Option<AudioClip> = None;
    if need_clips {
        match load_clip(base_dir, pair.audio_ref.as_deref().unwrap()) {
            Ok(c) => ref_clip = Some(c),
            Err(e) => errors.push(format!("audio_ref: {e}")),
        }
        match load_clip(base_dir, pair.audio_syn.as_deref().unwrap()) {
            Ok(c) => syn_clip = Some(c),
            Err(e) => errors.push(format!("audio_syn: {e}")),
        }
    }

    if want_de {
        if let (Some(r), Some(s)) = (&ref_clip, &syn_clip) {
            match duration_equality(r.duration_s(), s.duration_s()) {
                Ok(v) => report.duration_equality = Some(v),
                Err(e) => errors.push(format!("de: {e}")),
            }
        }
    }

    let mut ref_seq: Option<EmbeddingSequence> = None;
    let mut syn_seq: Option<EmbeddingSequence> = None;
    if want_secs || want_sbs {
        if have_embs {
            match emb1::read_file(&base_dir.join(pair.emb_ref.as_deref().unwrap())) {
                Ok(s) => ref_seq = Some(s),
                Err(e) => errors.push(format!("emb_ref: {e}")),
            }
            match emb1::read_file(&base_dir.join(pair.emb_syn.as_deref().unwrap())) {
                Ok(s) => syn_seq = Some(s),
                Err(e) => errors.push(format!("emb_syn: {e}")),
            }
        } else {
            if let Some(c) = &ref_clip {
                match baseline_sequence(c, mel_cfg) {
                    Ok(s) => ref_seq = Some(s),
                    Err(e) => errors.push(format!("audio_ref: {e}")),
                }
            }
            if let Some(c) = &syn_clip {
                match baseline_sequence(c, mel_cfg) {
                    Ok(s) => syn_seq = Some(s),
                    Err(e) => errors.push(format!("audio_syn: {e}")),
                }
            }
        }
    }

    if want_secs {
        if let (Some(r), Some(s)) = (&ref_seq, &syn_seq) {
            if r.len() != 1 || s.len() != 1 {
                errors.push(format!(
                    "secs: speaker embeddings must be single frames, got {} and {}",
                    r.len(),
                    s.len()
                ));
            } else {
                match super::secs(&r.vectors()[0], &s.vectors()[0]) {
                    Ok(v) => report.secs = Some(v),
                    Err(e) => errors.push(format!("secs: {e}")),
                }
            }
        }
    }

    if want_sbs {
        if let (Some(r), Some(s)) = (&ref_seq, &syn_seq) {
            // Generated frames are averaged; reference frames are maxed over.
            match speech_bert_score(s, r) {
                Ok(v) => report.speech_bert = Some(v),
                Err(e) => errors.push(format!("sbs: {e}")),
            }
        }
    }

    if metrics.contains(&MetricKind::Mos) {
        if let Some(ratings) = &pair.ratings {
            match aggregate_mos(ratings) {
                Ok(v) => report.smos = Some(v),
                Err(e) => errors.push(format!("mos: {e}")),
            }
        }
    }

    PairOutcome {
        id: pair.id.clone(),
        report,
        error: if errors.is_empty() {
            None
        } else {
            Some(errors.join("; "))
        },
    }
}

/// Evaluate a batch of pairs; outcomes keep input order.
pub fn evaluate_pairs(
    pairs: &[PairRecord],
    metrics: &[MetricKind],
    base_dir: &Path,
    mel_cfg: &MelConfig,
) -> Vec<PairOutcome> {
    batch::map(pairs, |pair| evaluate_pair(pair, metrics, base_dir, mel_cfg))
}

/// Sequential twin of [`evaluate_pairs`], kept public for benchmarks.
pub fn evaluate_pairs_seq(
    pairs: &[PairRecord],
    metrics: &[MetricKind],
    base_dir: &Path,
    mel_cfg: &MelConfig,
) -> Vec<PairOutcome> {
    batch::map_seq(pairs, |pair| evaluate_pair(pair, metrics, base_dir, mel_cfg))
}

/// Parse a pairs file from text. Blank lines are ignored.
pub fn parse_pairs(text: &str) -> Result<Vec<PairRecord>, PairsError> {
    let mut pairs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: PairRecord = serde_json::from_str(line).map_err(|e| PairsError::Line {
            line: idx + 1,
            detail: e.to_string(),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>, PairsError> {
    parse_pairs(&std::fs::read_to_string(path)?)
}

/// Serialize outcomes, one JSON object per line in input order.
pub fn outcomes_to_string(outcomes: &[PairOutcome]) -> String {
    let mut out = String::new();
    for outcome in outcomes {
        out.push_str(&serde_json::to_string(outcome).expect("outcome serializes"));
        out.push('\n');
    }
    out
}

pub fn write_outcomes(outcomes: &[PairOutcome], path: &Path) -> Result<(), PairsError> {
    std::fs::write(path, outcomes_to_string(outcomes))?;
    Ok(())
}
