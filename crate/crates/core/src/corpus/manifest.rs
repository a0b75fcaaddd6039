//! Line-delimited JSON manifests and filter reports.
//!
//! One object per line. Manifest keys: `id`, `audio`, `text` (required),
//! `speaker`, `words`, `duration`, `silence` (optional). Report keys: `id`,
//! `status` (`accept`/`reject`), and for rejections `rule` and `value`.
//! Reads reject unknown keys, and every parse failure carries its line
//! number; writes are deterministic, so identical inputs produce identical
//! bytes.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, CorpusRecord, Decision, FilterReport};

/// Parse a manifest from text. Blank lines are ignored.
pub fn parse_manifest(text: &str) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::Line {
                line: idx + 1,
                detail: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Read a manifest file.
pub fn read_manifest(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    parse_manifest(&std::fs::read_to_string(path)?)
}

/// Serialize records, one JSON object per line.
pub fn manifest_to_string(records: &[CorpusRecord]) -> String {
    let mut out = String::new();
    for record in records {
        // CorpusRecord holds only serializable primitives; this cannot fail.
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Write a manifest file.
pub fn write_manifest(records: &[CorpusRecord], path: &Path) -> Result<(), CorpusError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(manifest_to_string(records).as_bytes())?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportLine {
    id: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    value: Option<f64>,
}

/// Serialize a filter report, one decision per line in input order.
pub fn report_to_string(report: &FilterReport) -> String {
    let mut out = String::new();
    for d in &report.decisions {
        let line = match &d.decision {
            Decision::Accept => ReportLine {
                id: d.id.clone(),
                status: "accept".to_string(),
                rule: None,
                value: None,
            },
            Decision::Reject { rule, value } => ReportLine {
                id: d.id.clone(),
                status: "reject".to_string(),
                rule: Some(rule.name().to_string()),
                value: *value,
            },
        };
        out.push_str(&serde_json::to_string(&line).expect("report line serializes"));
        out.push('\n');
    }
    out
}

/// Write a filter report file.
pub fn write_report(report: &FilterReport, path: &Path) -> Result<(), CorpusError> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(report_to_string(report).as_bytes())?;
    Ok(())
}
