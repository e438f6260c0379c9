//! JSON Lines datasets (one keyframe per line) and JSON report files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::detection::LoopClosureReport;
use crate::keyframe::KeyframeRecord;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("malformed document: {0}")]
    MalformedDocument(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn write_jsonl<T: Serialize>(items: &[T], mut out: impl Write) -> std::io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Parses JSON Lines; blank lines are skipped, line numbers start at 1.
pub fn read_jsonl<T: DeserializeOwned>(input: impl BufRead) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn save_dataset(records: &[KeyframeRecord], path: &Path) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_jsonl(records, BufWriter::new(file)).map_err(io_err(path))
}

/// Loads a dataset and checks each record's invariants and id ordering.
pub fn load_dataset(path: &Path) -> Result<Vec<KeyframeRecord>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    parse_dataset(BufReader::new(file))
}

pub fn parse_dataset(input: impl BufRead) -> Result<Vec<KeyframeRecord>, DatasetError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| DatasetError::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: KeyframeRecord = serde_json::from_str(&line).map_err(|e| DatasetError::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        rec.validate().map_err(|e| DatasetError::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(prev) = records.last().map(|r: &KeyframeRecord| r.id) {
            if rec.id <= prev {
                return Err(DatasetError::MalformedRecord {
                    line: i + 1,
                    message: format!("keyframe id {} does not increase (previous {})", rec.id, prev),
                });
            }
        }
        records.push(rec);
    }
    Ok(records)
}

/// Pretty-printed JSON array with a trailing newline.
pub fn reports_json(reports: &[LoopClosureReport]) -> String {
    let mut text = serde_json::to_string_pretty(reports).expect("reports serialize");
    text.push('\n');
    text
}

pub fn save_reports(reports: &[LoopClosureReport], path: &Path) -> Result<(), DatasetError> {
    std::fs::write(path, reports_json(reports)).map_err(io_err(path))
}

pub fn load_reports(path: &Path) -> Result<Vec<LoopClosureReport>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::MalformedDocument(e.to_string()))
}
