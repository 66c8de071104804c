//! Extracting and validating judge verdicts from raw LLM output.
//!
//! LLM judges rarely return a bare JSON object: verdicts arrive wrapped in
//! prose, code fences, or both, sometimes with trailing commentary or stray
//! objects nearby. [`extract_json_block`] finds the first balanced JSON
//! object that actually decodes and carries a top-level `"final_score"` key;
//! [`parse_verdict`] then enforces the seven-field schema.
//!
//! Error `Display` strings are stable machine-readable codes
//! (`MissingField:explanation`, `OutOfRange:final_score`, ...) so downstream
//! failure tallies can group on them.

use crate::model::Verdict;
use serde_json::Value;
use thiserror::Error;

const REAL_FIELDS: [&str; 3] = ["semantic_similarity", "fact_match_ratio", "final_score"];
const COUNT_FIELDS: [&str; 3] = [
    "critical_facts_missed",
    "supporting_facts_missed",
    "trivial_facts_missed",
];

#[derive(Debug, Error, PartialEq)]
pub enum VerdictError {
    /// No decodable JSON object with a `final_score` key anywhere in the text.
    #[error("NoJsonFound")]
    NoJsonFound,
    /// An object opened but never closed (e.g. a truncated response).
    #[error("UnbalancedJson")]
    UnbalancedJson,
    /// The text handed to [`parse_verdict`] does not decode as a JSON object.
    #[error("UndecodableJson")]
    UndecodableJson,
    #[error("MissingField:{0}")]
    MissingField(&'static str),
    #[error("WrongType:{0}")]
    WrongType(&'static str),
    #[error("OutOfRange:{0}")]
    OutOfRange(&'static str),
    #[error("NegativeCount:{0}")]
    NegativeCount(&'static str),
    #[error("EmptyExplanation")]
    EmptyExplanation,
    /// Only under `allow_extra_keys: false`.
    #[error("UnexpectedField:{0}")]
    UnexpectedField(String),
}

/// What to do with a real-valued field outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RangeHandling {
    Reject,
    Clamp,
}

/// Knobs for how forgiving [`parse_verdict`] is. The default matches what
/// real judge output needs: clamp slightly-out-of-range reals, ignore extra
/// keys, and accept `1` where `1.0` was asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationPolicy {
    pub range_handling: RangeHandling,
    pub allow_extra_keys: bool,
    pub allow_integer_like_reals: bool,
}

impl Default for ValidationPolicy {
    fn default() -> Self {
        ValidationPolicy {
            range_handling: RangeHandling::Clamp,
            allow_extra_keys: true,
            allow_integer_like_reals: true,
        }
    }
}

/// Non-fatal oddities noticed while parsing an accepted verdict.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseWarning {
    Clamped { field: &'static str, original: f64 },
    DuplicateKey { key: String },
}

impl ParseWarning {
    /// Stable code, e.g. `clamped:semantic_similarity` or
    /// `duplicate_key:final_score`.
    pub fn code(&self) -> String {
        match self {
            ParseWarning::Clamped { field, .. } => format!("clamped:{field}"),
            ParseWarning::DuplicateKey { key } => format!("duplicate_key:{key}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVerdict {
    pub verdict: Verdict,
    pub warnings: Vec<ParseWarning>,
}

/// Scan from `start` (which must index a `{`) to the matching close brace,
/// honoring strings and escapes. Returns the end index (exclusive) of the
/// balanced span, or `None` if the object never closes.
fn balanced_span(bytes: &[u8], start: usize) -> Option<usize> {
    debug_assert_eq!(bytes[start], b'{');
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escape = false;
    for (offset, &b) in bytes[start..].iter().enumerate() {
        if in_string {
            if escape {
                escape = false;
            } else if b == b'\\' {
                escape = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(start + offset + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// Find the verdict object inside arbitrary LLM output.
///
/// Every `{` is tried as a candidate start; the candidate is the maximal
/// balanced span from that brace. The first candidate (by start position)
/// that decodes as a JSON object with a top-level `"final_score"` key wins;
/// surrounding prose, code fences, and trailing text are ignored. Braces
/// inside string literals never confuse the scan.
///
/// Errors: [`VerdictError::UnbalancedJson`] when at least one `{` exists but
/// no balanced object completes; [`VerdictError::NoJsonFound`] otherwise.
pub fn extract_json_block(text: &str) -> Result<&str, VerdictError> {
    let bytes = text.as_bytes();
    let mut saw_open = false;
    let mut saw_balanced = false;
    for start in 0..bytes.len() {
        if bytes[start] != b'{' {
            continue;
        }
        saw_open = true;
        let Some(end) = balanced_span(bytes, start) else {
            continue;
        };
        saw_balanced = true;
        let candidate = &text[start..end];
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(candidate) {
            if map.contains_key("final_score") {
                return Ok(candidate);
            }
        }
    }
    if saw_open && !saw_balanced {
        Err(VerdictError::UnbalancedJson)
    } else {
        Err(VerdictError::NoJsonFound)
    }
}

/// List the top-level keys of a serialized JSON object in document order,
/// duplicates included. Assumes `text` already decoded as an object.
fn top_level_keys(text: &str) -> Vec<String> {
    let mut keys = Vec::new();
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escape = false;
    let mut expecting_key = false;
    let mut collecting: Option<String> = None;
    for ch in text.chars() {
        if in_string {
            if escape {
                escape = false;
                if let Some(k) = collecting.as_mut() {
                    k.push(ch);
                }
            } else if ch == '\\' {
                escape = true;
            } else if ch == '"' {
                in_string = false;
                if let Some(k) = collecting.take() {
                    keys.push(k);
                    expecting_key = false;
                }
            } else if let Some(k) = collecting.as_mut() {
                k.push(ch);
            }
            continue;
        }
        match ch {
            '"' => {
                in_string = true;
                if depth == 1 && expecting_key {
                    collecting = Some(String::new());
                }
            }
            '{' | '[' => {
                depth += 1;
                if depth == 1 && ch == '{' {
                    expecting_key = true;
                }
            }
            '}' | ']' => depth -= 1,
            ',' if depth == 1 => expecting_key = true,
            ':' if depth == 1 => expecting_key = false,
            _ => {}
        }
    }
    keys
}

fn real_field(
    map: &serde_json::Map<String, Value>,
    field: &'static str,
    policy: &ValidationPolicy,
    warnings: &mut Vec<ParseWarning>,
) -> Result<f64, VerdictError> {
    let value = map.get(field).expect("presence checked earlier");
    let number = match value {
        Value::Number(n) => n,
        _ => return Err(VerdictError::WrongType(field)),
    };
    if !policy.allow_integer_like_reals && !number.is_f64() {
        return Err(VerdictError::WrongType(field));
    }
    let v = number.as_f64().ok_or(VerdictError::WrongType(field))?;
    if (0.0..=1.0).contains(&v) {
        return Ok(v);
    }
    match policy.range_handling {
        RangeHandling::Reject => Err(VerdictError::OutOfRange(field)),
        RangeHandling::Clamp => {
            warnings.push(ParseWarning::Clamped { field, original: v });
            Ok(v.clamp(0.0, 1.0))
        }
    }
}

fn count_field(
    map: &serde_json::Map<String, Value>,
    field: &'static str,
    policy: &ValidationPolicy,
) -> Result<u32, VerdictError> {
    let value = map.get(field).expect("presence checked earlier");
    let number = match value {
        Value::Number(n) => n,
        _ => return Err(VerdictError::WrongType(field)),
    };
    if let Some(u) = number.as_u64() {
        return u32::try_from(u).map_err(|_| VerdictError::WrongType(field));
    }
    if number.as_i64().is_some_and(|i| i < 0) {
        return Err(VerdictError::NegativeCount(field));
    }
    // A float: accept integral values like 2.0 unless the policy forbids it.
    let v = number.as_f64().ok_or(VerdictError::WrongType(field))?;
    if !policy.allow_integer_like_reals {
        return Err(VerdictError::WrongType(field));
    }
    if v < 0.0 {
        return Err(VerdictError::NegativeCount(field));
    }
    if v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(VerdictError::WrongType(field));
    }
    Ok(v as u32)
}

/// Validate a serialized verdict object against the seven-field schema.
///
/// `json_text` should be the output of [`extract_json_block`] (or any text
/// that decodes as a JSON object). When a top-level key repeats, the last
/// occurrence wins and a `duplicate_key` warning is recorded.
pub fn parse_verdict(
    json_text: &str,
    policy: &ValidationPolicy,
) -> Result<ParsedVerdict, VerdictError> {
    let map = match serde_json::from_str::<Value>(json_text) {
        Ok(Value::Object(map)) => map,
        _ => return Err(VerdictError::UndecodableJson),
    };

    let mut warnings = Vec::new();
    let keys = top_level_keys(json_text);
    let mut seen: Vec<&str> = Vec::new();
    for key in &keys {
        if seen.contains(&key.as_str()) {
            let already = warnings
                .iter()
                .any(|w| matches!(w, ParseWarning::DuplicateKey { key: k } if k == key));
            if !already {
                warnings.push(ParseWarning::DuplicateKey { key: key.clone() });
            }
        } else {
            seen.push(key);
        }
    }
    if !policy.allow_extra_keys {
        let known: Vec<&str> = REAL_FIELDS
            .iter()
            .chain(COUNT_FIELDS.iter())
            .copied()
            .chain(std::iter::once("explanation"))
            .collect();
        if let Some(unknown) = keys.iter().find(|k| !known.contains(&k.as_str())) {
            return Err(VerdictError::UnexpectedField(unknown.clone()));
        }
    }

    for field in REAL_FIELDS.iter().chain(COUNT_FIELDS.iter()) {
        if !map.contains_key(*field) {
            return Err(VerdictError::MissingField(field));
        }
    }
    if !map.contains_key("explanation") {
        return Err(VerdictError::MissingField("explanation"));
    }

    let semantic_similarity = real_field(&map, "semantic_similarity", policy, &mut warnings)?;
    let fact_match_ratio = real_field(&map, "fact_match_ratio", policy, &mut warnings)?;
    let final_score = real_field(&map, "final_score", policy, &mut warnings)?;
    let critical_facts_missed = count_field(&map, "critical_facts_missed", policy)?;
    let supporting_facts_missed = count_field(&map, "supporting_facts_missed", policy)?;
    let trivial_facts_missed = count_field(&map, "trivial_facts_missed", policy)?;
    let explanation = match map.get("explanation").expect("presence checked") {
        Value::String(s) if s.is_empty() => return Err(VerdictError::EmptyExplanation),
        Value::String(s) => s.clone(),
        _ => return Err(VerdictError::WrongType("explanation")),
    };

    Ok(ParsedVerdict {
        verdict: Verdict {
            semantic_similarity,
            fact_match_ratio,
            critical_facts_missed,
            supporting_facts_missed,
            trivial_facts_missed,
            final_score,
            explanation,
        },
        warnings,
    })
}

/// Extract and validate in one step: the usual entry point for raw judge
/// output.
pub fn parse_llm_output(
    text: &str,
    policy: &ValidationPolicy,
) -> Result<ParsedVerdict, VerdictError> {
    let block = extract_json_block(text)?;
    parse_verdict(block, policy)
}
