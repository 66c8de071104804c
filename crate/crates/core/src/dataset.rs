//! Loading evaluation sets (JSONL or CSV), human label files, and dataset
//! summary statistics.
//!
//! Errors carry 1-based row numbers (data rows, excluding the CSV header)
//! and the offending field so a bad export is fixable without bisecting the
//! file by hand.

use crate::model::{ContextDoc, EvalRecord};
use serde::Deserialize;
use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("failed to read {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("row {row}: not decodable: {detail}")]
    Malformed { row: usize, detail: String },
    #[error("row {row}: field {field}: {detail}")]
    Schema {
        row: usize,
        field: String,
        detail: String,
    },
    #[error("duplicate request_id {0:?}")]
    DuplicateId(String),
    #[error("row {row}: bad label token {token:?}")]
    BadLabel { row: usize, token: String },
    #[error("dataset is empty")]
    Empty,
    #[error("unknown dataset format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(DatasetFormat::Jsonl),
            "csv" => Ok(DatasetFormat::Csv),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

/// Accepted spellings for a binary human label, case-insensitive.
fn parse_label_token(token: &str) -> Option<bool> {
    match token.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "pass" => Some(true),
        "false" | "0" | "fail" => Some(false),
        _ => None,
    }
}

fn read_file(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

#[derive(Deserialize)]
struct RawJsonRecord {
    request_id: Option<String>,
    request: Option<String>,
    expected_response: Option<String>,
    response: Option<String>,
    #[serde(default)]
    expected_retrieved_context: Option<serde_json::Value>,
    #[serde(default)]
    human_label: Option<serde_json::Value>,
}

fn require(
    value: Option<String>,
    row: usize,
    field: &str,
) -> Result<String, DatasetError> {
    match value {
        None => Err(DatasetError::Schema {
            row,
            field: field.to_string(),
            detail: "missing".into(),
        }),
        Some(s) if s.is_empty() => Err(DatasetError::Schema {
            row,
            field: field.to_string(),
            detail: "empty".into(),
        }),
        Some(s) => Ok(s),
    }
}

fn context_from_value(
    value: Option<serde_json::Value>,
    row: usize,
) -> Result<Option<Vec<ContextDoc>>, DatasetError> {
    match value {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v).map(Some).map_err(|e| DatasetError::Schema {
            row,
            field: "expected_retrieved_context".into(),
            detail: e.to_string(),
        }),
    }
}

fn label_from_value(
    value: Option<serde_json::Value>,
    row: usize,
) -> Result<Option<bool>, DatasetError> {
    match value {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(serde_json::Value::Bool(b)) => Ok(Some(b)),
        Some(serde_json::Value::Number(n)) => match n.as_i64() {
            Some(0) => Ok(Some(false)),
            Some(1) => Ok(Some(true)),
            _ => Err(DatasetError::BadLabel {
                row,
                token: n.to_string(),
            }),
        },
        Some(serde_json::Value::String(s)) => match parse_label_token(&s) {
            Some(b) => Ok(Some(b)),
            None => Err(DatasetError::BadLabel { row, token: s }),
        },
        Some(other) => Err(DatasetError::BadLabel {
            row,
            token: other.to_string(),
        }),
    }
}

fn load_jsonl(content: &str) -> Result<Vec<EvalRecord>, DatasetError> {
    let mut records = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawJsonRecord =
            serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
                row,
                detail: e.to_string(),
            })?;
        records.push(EvalRecord {
            request_id: require(raw.request_id, row, "request_id")?,
            request: require(raw.request, row, "request")?,
            expected_response: require(raw.expected_response, row, "expected_response")?,
            response: require(raw.response, row, "response")?,
            expected_retrieved_context: context_from_value(raw.expected_retrieved_context, row)?,
            human_label: label_from_value(raw.human_label, row)?,
        });
    }
    Ok(records)
}

fn load_csv(content: &str) -> Result<Vec<EvalRecord>, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Malformed {
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let required = ["request_id", "request", "expected_response", "response"];
    let mut required_idx = Vec::new();
    for name in required {
        match col(name) {
            Some(idx) => required_idx.push(idx),
            None => {
                return Err(DatasetError::Schema {
                    row: 0,
                    field: name.to_string(),
                    detail: "missing column".into(),
                })
            }
        }
    }
    let context_idx = col("expected_retrieved_context");
    let label_idx = col("human_label");

    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| DatasetError::Malformed {
            row,
            detail: e.to_string(),
        })?;
        let field = |idx: usize| record.get(idx).unwrap_or("").to_string();
        let context = match context_idx.map(field) {
            None => None,
            Some(cell) if cell.is_empty() => None,
            Some(cell) => Some(serde_json::from_str::<Vec<ContextDoc>>(&cell).map_err(|e| {
                DatasetError::Schema {
                    row,
                    field: "expected_retrieved_context".into(),
                    detail: e.to_string(),
                }
            })?),
        };
        let human_label = match label_idx.map(field) {
            None => None,
            Some(cell) if cell.trim().is_empty() => None,
            Some(cell) => match parse_label_token(&cell) {
                Some(b) => Some(b),
                None => return Err(DatasetError::BadLabel { row, token: cell }),
            },
        };
        records.push(EvalRecord {
            request_id: require(Some(field(required_idx[0])), row, "request_id")?,
            request: require(Some(field(required_idx[1])), row, "request")?,
            expected_response: require(Some(field(required_idx[2])), row, "expected_response")?,
            response: require(Some(field(required_idx[3])), row, "response")?,
            expected_retrieved_context: context,
            human_label,
        });
    }
    Ok(records)
}

/// Load an evaluation set, enforcing nonempty required fields and unique
/// `request_id`s. Blank JSONL lines are skipped; CSV needs a header row
/// with at least `request_id,request,expected_response,response`.
pub fn load_eval_set(path: &Path, format: DatasetFormat) -> Result<Vec<EvalRecord>, DatasetError> {
    let content = read_file(path)?;
    let records = match format {
        DatasetFormat::Jsonl => load_jsonl(&content)?,
        DatasetFormat::Csv => load_csv(&content)?,
    };
    let mut seen = HashSet::new();
    for record in &records {
        if !seen.insert(record.request_id.as_str()) {
            return Err(DatasetError::DuplicateId(record.request_id.clone()));
        }
    }
    Ok(records)
}

/// Serialize records as JSONL, one object per line, preserving field order.
pub fn write_eval_set_jsonl(records: &[EvalRecord], path: &Path) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    file.write_all(&out).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Load a `request_id,human_label` CSV. Label tokens follow
/// [`parse_label_token`]; a repeated id is an error rather than a silent
/// overwrite.
pub fn load_human_labels(path: &Path) -> Result<BTreeMap<String, bool>, DatasetError> {
    let content = read_file(path)?;
    let mut reader = csv::Reader::from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Malformed {
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let id_idx = headers
        .iter()
        .position(|h| h == "request_id")
        .ok_or_else(|| DatasetError::Schema {
            row: 0,
            field: "request_id".into(),
            detail: "missing column".into(),
        })?;
    let label_idx = headers
        .iter()
        .position(|h| h == "human_label")
        .ok_or_else(|| DatasetError::Schema {
            row: 0,
            field: "human_label".into(),
            detail: "missing column".into(),
        })?;

    let mut labels = BTreeMap::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 1;
        let record = result.map_err(|e| DatasetError::Malformed {
            row,
            detail: e.to_string(),
        })?;
        let id = record.get(id_idx).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(DatasetError::Schema {
                row,
                field: "request_id".into(),
                detail: "empty".into(),
            });
        }
        let token = record.get(label_idx).unwrap_or("");
        let label = parse_label_token(token).ok_or_else(|| DatasetError::BadLabel {
            row,
            token: token.to_string(),
        })?;
        if labels.insert(id.clone(), label).is_some() {
            return Err(DatasetError::DuplicateId(id));
        }
    }
    Ok(labels)
}

/// Attach labels to matching records (overwriting any inline label).
/// Returns how many records were labeled; ids present only in the label
/// map are ignored.
pub fn apply_labels(records: &mut [EvalRecord], labels: &BTreeMap<String, bool>) -> usize {
    let mut applied = 0;
    for record in records {
        if let Some(&label) = labels.get(&record.request_id) {
            record.human_label = Some(label);
            applied += 1;
        }
    }
    applied
}

/// Length statistics for one text field across the dataset. Characters are
/// Unicode scalar values, not bytes; words are maximal whitespace-separated
/// runs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FieldStats {
    pub avg_chars: f64,
    pub min_chars: usize,
    pub max_chars: usize,
    pub avg_words: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetStats {
    pub records: usize,
    pub labeled: usize,
    pub request: FieldStats,
    pub expected_response: FieldStats,
    pub response: FieldStats,
}

fn field_stats<'a>(texts: impl Iterator<Item = &'a str> + Clone) -> FieldStats {
    let mut n = 0usize;
    let mut total_chars = 0usize;
    let mut total_words = 0usize;
    let mut min_chars = usize::MAX;
    let mut max_chars = 0usize;
    for text in texts {
        let chars = text.chars().count();
        n += 1;
        total_chars += chars;
        total_words += text.split_whitespace().count();
        min_chars = min_chars.min(chars);
        max_chars = max_chars.max(chars);
    }
    FieldStats {
        avg_chars: total_chars as f64 / n as f64,
        min_chars,
        max_chars,
        avg_words: total_words as f64 / n as f64,
    }
}

pub fn summarize_dataset(records: &[EvalRecord]) -> Result<DatasetStats, DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(DatasetStats {
        records: records.len(),
        labeled: records.iter().filter(|r| r.human_label.is_some()).count(),
        request: field_stats(records.iter().map(|r| r.request.as_str())),
        expected_response: field_stats(records.iter().map(|r| r.expected_response.as_str())),
        response: field_stats(records.iter().map(|r| r.response.as_str())),
    })
}
