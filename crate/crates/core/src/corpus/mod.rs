//! Corpus records, transcript segmentation, and the filtering pipeline.
//!
//! A corpus arrives as a manifest of text/audio pairs plus optional
//! annotations (speaker label, word timings, precomputed duration and silence
//! measurements). [`apply_filters`] screens each record against a
//! [`FilterPolicy`] and emits one decision per record: accepted, or rejected
//! with the first failing rule and the measured value that tripped it.
//! Decisions are per-record pure, so the batch runs data-parallel and the
//! report order always matches the input order.

pub mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::batch;
use crate::config::{ConfigError, KvConfig};
use crate::dsp::{self, decode_wav};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("manifest line {line}: {detail}")]
    Line { line: usize, detail: String },
    #[error("text has {tokens} whitespace-delimited tokens but {timings} word timings")]
    TimingCount { tokens: usize, timings: usize },
    #[error("word timing {index} is out of order or overlaps its predecessor")]
    UnsortedTimings { index: usize },
    #[error("record {id:?} has no positive duration")]
    NonPositiveDuration { id: String },
    #[error("invalid filter policy: {0}")]
    InvalidPolicy(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

// ==== records ====

/// One word with its aligned time span, serialized as `[word, start, end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "(String, f64, f64)", into = "(String, f64, f64)")]
pub struct WordTiming {
    pub word: String,
    pub start_s: f64,
    pub end_s: f64,
}

impl From<(String, f64, f64)> for WordTiming {
    fn from((word, start_s, end_s): (String, f64, f64)) -> Self {
        Self { word, start_s, end_s }
    }
}

impl From<WordTiming> for (String, f64, f64) {
    fn from(t: WordTiming) -> Self {
        (t.word, t.start_s, t.end_s)
    }
}

/// One text/audio pair flowing through the pipeline.
///
/// `duration_s` and `silence_ratio` are annotations: present when a manifest
/// carries precomputed values, otherwise measured from the audio on first
/// need during filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    pub id: String,
    #[serde(rename = "audio")]
    pub audio_path: String,
    pub text: String,
    #[serde(rename = "speaker", skip_serializing_if = "Option::is_none", default)]
    pub speaker_id: Option<String>,
    #[serde(rename = "words", skip_serializing_if = "Option::is_none", default)]
    pub word_timings: Option<Vec<WordTiming>>,
    #[serde(rename = "duration", skip_serializing_if = "Option::is_none", default)]
    pub duration_s: Option<f64>,
    #[serde(rename = "silence", skip_serializing_if = "Option::is_none", default)]
    pub silence_ratio: Option<f64>,
}

/// Unicode scalar count of NFC-normalized text (whitespace and punctuation
/// included). Combining marks that compose under NFC count as one.
pub fn char_count(text: &str) -> usize {
    text.nfc().count()
}

/// Characters per second of audio.
pub fn text_audio_ratio(record: &CorpusRecord) -> Result<f64, CorpusError> {
    match record.duration_s {
        Some(d) if d > 0.0 => Ok(char_count(&record.text) as f64 / d),
        _ => Err(CorpusError::NonPositiveDuration {
            id: record.id.clone(),
        }),
    }
}

// ==== transcript segmentation ====

/// A transcript slice closed by terminal punctuation, with its time span and
/// the byte span it occupies in the source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
    pub byte_span: (usize, usize),
}

/// True when a token closes a segment: it ends with the danda, a question
/// mark, an exclamation mark, or a comma.
fn ends_segment(token: &str) -> bool {
    matches!(token.chars().last(), Some('।' | '?' | '!' | ','))
}

/// Split a transcript after each terminal punctuation mark.
///
/// `timings` must list one entry per whitespace-delimited token, in order,
/// non-overlapping. Each segment spans whole tokens; its `start_s`/`end_s`
/// come from the first and last contained word, and its text is the exact
/// source substring, so the original text is recoverable as
/// leading-whitespace + segments joined by the inter-segment separators.
pub fn segment_transcript(
    text: &str,
    timings: &[WordTiming],
) -> Result<Vec<Segment>, CorpusError> {
    // Token byte spans, by hand so segment text can be sliced from source.
    let mut tokens: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        tokens.push((s, text.len()));
    }

    if tokens.len() != timings.len() {
        return Err(CorpusError::TimingCount {
            tokens: tokens.len(),
            timings: timings.len(),
        });
    }
    for (i, t) in timings.iter().enumerate() {
        let inverted = t.end_s < t.start_s;
        let overlaps = i > 0 && t.start_s < timings[i - 1].end_s;
        if inverted || overlaps {
            return Err(CorpusError::UnsortedTimings { index: i });
        }
    }

    let mut segments = Vec::new();
    let mut first = 0;
    for (i, &(_, end)) in tokens.iter().enumerate() {
        let token = &text[tokens[i].0..end];
        if ends_segment(token) || i + 1 == tokens.len() {
            let span = (tokens[first].0, end);
            segments.push(Segment {
                text: text[span.0..span.1].to_string(),
                start_s: timings[first].start_s,
                end_s: timings[i].end_s,
                byte_span: span,
            });
            first = i + 1;
        }
    }
    Ok(segments)
}

// ==== filtering ====

/// Screening thresholds. Boundary semantics are inclusive-accept throughout:
/// durations of exactly `min`/`max` pass, exactly `max_text_chars` characters
/// pass, a silence ratio of exactly `max_silence_ratio` passes, and the
/// ratio band is the closed interval `[low, high]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPolicy {
    pub min_duration_s: f64,
    pub max_duration_s: f64,
    pub max_text_chars: usize,
    pub max_silence_ratio: f64,
    pub ratio_band: (f64, f64),
    /// Reject records without a speaker label (stands in for single-speaker
    /// screening done by an external diarization stage).
    pub require_speaker: bool,
    /// Analysis frame for the silence measurement, applied by [`file_probe`].
    pub silence_frame_ms: f64,
    /// Relative silence threshold in dB, applied by [`file_probe`].
    pub silence_db: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_duration_s: 0.5,
            max_duration_s: 11.0,
            max_text_chars: 200,
            max_silence_ratio: 0.35,
            ratio_band: (6.0, 25.0),
            require_speaker: false,
            silence_frame_ms: dsp::DEFAULT_SILENCE_FRAME_MS,
            silence_db: dsp::DEFAULT_SILENCE_DB,
        }
    }
}

const POLICY_KEYS: &[&str] = &[
    "min_duration_s",
    "max_duration_s",
    "max_text_chars",
    "max_silence_ratio",
    "ratio_low",
    "ratio_high",
    "require_speaker",
    "silence_frame_ms",
    "silence_db",
];

impl FilterPolicy {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let fail = |d: &str| Err(CorpusError::InvalidPolicy(d.to_string()));
        let finite = [
            self.min_duration_s,
            self.max_duration_s,
            self.max_silence_ratio,
            self.ratio_band.0,
            self.ratio_band.1,
            self.silence_frame_ms,
            self.silence_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all thresholds must be finite");
        }
        if self.min_duration_s >= self.max_duration_s {
            return fail("need min_duration_s < max_duration_s");
        }
        if self.ratio_band.0 >= self.ratio_band.1 {
            return fail("need ratio_low < ratio_high");
        }
        if self.silence_frame_ms <= 0.0 {
            return fail("silence_frame_ms must be positive");
        }
        Ok(())
    }

    /// Overlay values from a parsed config onto the defaults.
    pub fn from_kv(kv: &KvConfig) -> Result<Self, CorpusError> {
        kv.reject_unknown(POLICY_KEYS)?;
        let mut p = Self::default();
        if let Some(v) = kv.get_f64("min_duration_s")? {
            p.min_duration_s = v;
        }
        if let Some(v) = kv.get_f64("max_duration_s")? {
            p.max_duration_s = v;
        }
        if let Some(v) = kv.get_usize("max_text_chars")? {
            p.max_text_chars = v;
        }
        if let Some(v) = kv.get_f64("max_silence_ratio")? {
            p.max_silence_ratio = v;
        }
        if let Some(v) = kv.get_f64("ratio_low")? {
            p.ratio_band.0 = v;
        }
        if let Some(v) = kv.get_f64("ratio_high")? {
            p.ratio_band.1 = v;
        }
        if let Some(v) = kv.get_bool("require_speaker")? {
            p.require_speaker = v;
        }
        if let Some(v) = kv.get_f64("silence_frame_ms")? {
            p.silence_frame_ms = v;
        }
        if let Some(v) = kv.get_f64("silence_db")? {
            p.silence_db = v;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        Self::from_kv(&KvConfig::from_file(path)?)
    }
}

/// The screening rules, in evaluation order. A rejection always names the
/// first rule that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FilterRule {
    DurationMin,
    DurationMax,
    TextLength,
    Silence,
    RatioBand,
    MissingSpeaker,
    /// Audio could not be decoded (or measured) when an annotation was
    /// missing; never aborts the batch.
    Unreadable,
}

impl FilterRule {
    pub fn name(self) -> &'static str {
        match self {
            FilterRule::DurationMin => "duration-min",
            FilterRule::DurationMax => "duration-max",
            FilterRule::TextLength => "text-length",
            FilterRule::Silence => "silence",
            FilterRule::RatioBand => "ratio-band",
            FilterRule::MissingSpeaker => "missing-speaker",
            FilterRule::Unreadable => "unreadable",
        }
    }
}

impl std::fmt::Display for FilterRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome for one record.
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Accept,
    Reject {
        rule: FilterRule,
        /// The measured value that tripped the rule, when one exists.
        value: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordDecision {
    pub id: String,
    pub decision: Decision,
}

/// All decisions, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub decisions: Vec<RecordDecision>,
}

impl FilterReport {
    /// Ids of accepted records, in input order.
    pub fn accepted(&self) -> Vec<&str> {
        self.decisions
            .iter()
            .filter(|d| d.decision == Decision::Accept)
            .map(|d| d.id.as_str())
            .collect()
    }

    /// Rejected records as (id, rule, value), in input order.
    pub fn rejected(&self) -> Vec<(&str, FilterRule, Option<f64>)> {
        self.decisions
            .iter()
            .filter_map(|d| match d.decision {
                Decision::Accept => None,
                Decision::Reject { rule, value } => Some((d.id.as_str(), rule, value)),
            })
            .collect()
    }

    /// Rejection counts per rule.
    pub fn counts(&self) -> BTreeMap<FilterRule, usize> {
        let mut counts = BTreeMap::new();
        for (_, rule, _) in self.rejected() {
            *counts.entry(rule).or_insert(0) += 1;
        }
        counts
    }
}

/// Audio measurements supplied by a probe when a record lacks annotations.
///
/// `silence_ratio` is `None` when the clip decoded but was too short to hold
/// a single analysis frame.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioStats {
    pub duration_s: f64,
    pub silence_ratio: Option<f64>,
}

/// A probe that reads a record's audio from disk, resolving relative paths
/// against `base_dir` (normally the manifest's directory).
pub fn file_probe(
    base_dir: PathBuf,
    frame_ms: f64,
    rel_db_threshold: f64,
) -> impl Fn(&CorpusRecord) -> Result<AudioStats, String> + Sync {
    move |record| {
        let path = base_dir.join(&record.audio_path);
        let bytes =
            std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let clip = decode_wav(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(AudioStats {
            duration_s: clip.duration_s(),
            silence_ratio: dsp::silence_ratio(&clip, frame_ms, rel_db_threshold).ok(),
        })
    }
}

/// Decide one record. The probe runs at most once, on first need.
fn decide<F>(record: &CorpusRecord, policy: &FilterPolicy, probe: &F) -> Decision
where
    F: Fn(&CorpusRecord) -> Result<AudioStats, String>,
{
    let mut cached: Option<Result<AudioStats, String>> = None;
    let reject = |rule, value| Decision::Reject { rule, value };
    let unreadable = || reject(FilterRule::Unreadable, None);

    let duration = match record.duration_s {
        Some(d) => d,
        None => match cached.get_or_insert_with(|| probe(record)) {
            Ok(stats) => stats.duration_s,
            Err(_) => return unreadable(),
        },
    };
    if duration < policy.min_duration_s {
        return reject(FilterRule::DurationMin, Some(duration));
    }
    if duration > policy.max_duration_s {
        return reject(FilterRule::DurationMax, Some(duration));
    }

    let chars = char_count(&record.text);
    if chars > policy.max_text_chars {
        return reject(FilterRule::TextLength, Some(chars as f64));
    }

    let silence = match record.silence_ratio {
        Some(s) => Some(s),
        None => match cached.get_or_insert_with(|| probe(record)) {
            Ok(stats) => stats.silence_ratio,
            Err(_) => return unreadable(),
        },
    };
    let Some(silence) = silence else {
        return unreadable();
    };
    if silence > policy.max_silence_ratio {
        return reject(FilterRule::Silence, Some(silence));
    }

    if duration <= 0.0 {
        // Unreachable under any positive min_duration_s; guards the division.
        return reject(FilterRule::RatioBand, None);
    }
    let ratio = chars as f64 / duration;
    if ratio < policy.ratio_band.0 || ratio > policy.ratio_band.1 {
        return reject(FilterRule::RatioBand, Some(ratio));
    }

    if policy.require_speaker && record.speaker_id.is_none() {
        return reject(FilterRule::MissingSpeaker, None);
    }
    Decision::Accept
}

/// Screen every record against the policy.
///
/// Rules run in the fixed order duration-min, duration-max, text-length,
/// silence, ratio-band, missing-speaker; the probe supplies duration and
/// silence for records lacking those annotations, and a failing probe
/// rejects that record with rule `unreadable` rather than aborting the
/// batch. Decisions are emitted in input order.
pub fn apply_filters<F>(
    records: &[CorpusRecord],
    policy: &FilterPolicy,
    probe: F,
) -> FilterReport
where
    F: Fn(&CorpusRecord) -> Result<AudioStats, String> + Sync,
{
    let decisions = batch::map(records, |record| RecordDecision {
        id: record.id.clone(),
        decision: decide(record, policy, &probe),
    });
    FilterReport { decisions }
}

/// Sequential twin of [`apply_filters`], kept public for benchmarks.
pub fn apply_filters_seq<F>(
    records: &[CorpusRecord],
    policy: &FilterPolicy,
    probe: F,
) -> FilterReport
where
    F: Fn(&CorpusRecord) -> Result<AudioStats, String>,
{
    let decisions = batch::map_seq(records, |record| RecordDecision {
        id: record.id.clone(),
        decision: decide(record, policy, &probe),
    });
    FilterReport { decisions }
}
