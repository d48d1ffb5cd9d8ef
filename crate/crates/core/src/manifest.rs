//! JSONL manifest I/O. One record per line, unknown fields carried through
//! untouched so older tooling can read newer manifests and vice versa.

use crate::model::AnnotationRecord;
use std::collections::HashSet;
use std::io::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("line {line}: duplicate id {id}")]
    DuplicateId { id: String, line: usize },
}

/// Parses JSONL text; blank lines are tolerated, anything else must be one
/// record object. Errors cite 1-based line numbers.
pub fn records_from_jsonl(text: &str) -> Result<Vec<AnnotationRecord>, ManifestError> {
    let mut records = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: AnnotationRecord = serde_json::from_str(line)
            .map_err(|e| ManifestError::MalformedLine { line: i + 1, detail: e.to_string() })?;
        if !seen.insert(record.id.clone()) {
            return Err(ManifestError::DuplicateId { id: record.id, line: i + 1 });
        }
        records.push(record);
    }
    Ok(records)
}

pub fn records_to_jsonl(records: &[AnnotationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn load_manifest(path: &Path) -> Result<Vec<AnnotationRecord>, ManifestError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ManifestError::Io { path: path.display().to_string(), message: e.to_string() })?;
    records_from_jsonl(&text)
}

pub fn write_manifest(records: &[AnnotationRecord], path: &Path) -> Result<(), ManifestError> {
    let io_err = |e: std::io::Error| ManifestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(records_to_jsonl(records).as_bytes()).map_err(io_err)?;
    Ok(())
}
