//! Judging prompt templates and placeholder substitution.
//!
//! Two builtin templates ship with the crate: the weighted template, which
//! asks the judge to bucket missed facts into critical / supporting / trivial
//! before scoring, and a plain baseline template that asks only for an
//! overall match. Both carry exactly one `{ai_response}` and one
//! `{gold_response}` placeholder.

use crate::model::PromptKind;
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const AI_PLACEHOLDER: &str = "{ai_response}";
pub const GOLD_PLACEHOLDER: &str = "{gold_response}";

const WEIGHTED_BODY: &str = include_str!("../assets/weighted_prompt.txt");
const BASELINE_BODY: &str = include_str!("../assets/baseline_prompt.txt");

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("template is invalid: {0}")]
    InvalidTemplate(IssueList),
    #[error("template is missing placeholder {0}")]
    MissingPlaceholder(&'static str),
    #[error("cannot render with an empty {0}")]
    EmptyInput(&'static str),
    #[error("failed to read template file: {0}")]
    Io(String),
}

/// Problems found by [`validate`]; a well-formed template yields none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateIssue {
    Empty,
    MissingPlaceholder(&'static str),
    DuplicatePlaceholder(&'static str),
}

impl fmt::Display for TemplateIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemplateIssue::Empty => write!(f, "empty body"),
            TemplateIssue::MissingPlaceholder(p) => write!(f, "missing {p}"),
            TemplateIssue::DuplicatePlaceholder(p) => write!(f, "duplicate {p}"),
        }
    }
}

/// Wrapper so a `Vec<TemplateIssue>` can sit inside an error message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssueList(pub Vec<TemplateIssue>);

impl fmt::Display for IssueList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(", "))
    }
}

/// A validated prompt template.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplate {
    kind: PromptKind,
    body: String,
}

impl PromptTemplate {
    /// Wrap a template body, rejecting it if [`validate`] finds any issue.
    pub fn new(kind: PromptKind, body: impl Into<String>) -> Result<Self, PromptError> {
        let body = body.into();
        let issues = validate(&body);
        if issues.is_empty() {
            Ok(PromptTemplate { kind, body })
        } else {
            Err(PromptError::InvalidTemplate(IssueList(issues)))
        }
    }

    /// Load a template from disk. CRLF line endings are normalized to LF so
    /// rendered prompts do not depend on how the file was checked out.
    pub fn from_file(kind: PromptKind, path: &Path) -> Result<Self, PromptError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Io(format!("{}: {e}", path.display())))?;
        Self::new(kind, raw.replace("\r\n", "\n"))
    }

    pub fn kind(&self) -> PromptKind {
        self.kind
    }

    pub fn body(&self) -> &str {
        &self.body
    }
}

/// The builtin fact-weighted judging template.
pub fn builtin_weighted_template() -> PromptTemplate {
    PromptTemplate::new(PromptKind::Weighted, WEIGHTED_BODY)
        .expect("builtin weighted template is well-formed")
}

/// The builtin unweighted judging template used for baseline runs. It never
/// mentions fact weighting; the verdict it requests has no missed-fact
/// counts.
pub fn builtin_baseline_template() -> PromptTemplate {
    PromptTemplate::new(PromptKind::Baseline, BASELINE_BODY)
        .expect("builtin baseline template is well-formed")
}

pub fn builtin_template(kind: PromptKind) -> PromptTemplate {
    match kind {
        PromptKind::Weighted => builtin_weighted_template(),
        PromptKind::Baseline => builtin_baseline_template(),
    }
}

/// Check a template body: it must be nonempty and contain each placeholder
/// exactly once. Returns every issue found, in a fixed order.
pub fn validate(body: &str) -> Vec<TemplateIssue> {
    let mut issues = Vec::new();
    if body.is_empty() {
        issues.push(TemplateIssue::Empty);
    }
    for placeholder in [AI_PLACEHOLDER, GOLD_PLACEHOLDER] {
        match body.matches(placeholder).count() {
            0 => issues.push(TemplateIssue::MissingPlaceholder(placeholder)),
            1 => {}
            _ => issues.push(TemplateIssue::DuplicatePlaceholder(placeholder)),
        }
    }
    issues
}

/// Substitute the candidate and gold responses into a template.
///
/// Substitution is literal and position-based: the template is split at the
/// two placeholder spans and the inputs are spliced in, so placeholder-like
/// text inside either input is left untouched. Both inputs must be nonempty.
pub fn render(
    template: &PromptTemplate,
    ai_response: &str,
    gold_response: &str,
) -> Result<String, PromptError> {
    if ai_response.is_empty() {
        return Err(PromptError::EmptyInput("ai_response"));
    }
    if gold_response.is_empty() {
        return Err(PromptError::EmptyInput("gold_response"));
    }
    let body = template.body();
    let ai_at = body
        .find(AI_PLACEHOLDER)
        .ok_or(PromptError::MissingPlaceholder(AI_PLACEHOLDER))?;
    let gold_at = body
        .find(GOLD_PLACEHOLDER)
        .ok_or(PromptError::MissingPlaceholder(GOLD_PLACEHOLDER))?;

    let mut spans = [
        (ai_at, AI_PLACEHOLDER.len(), ai_response),
        (gold_at, GOLD_PLACEHOLDER.len(), gold_response),
    ];
    spans.sort_by_key(|(at, _, _)| *at);

    let mut out = String::with_capacity(body.len() + ai_response.len() + gold_response.len());
    let mut cursor = 0;
    for (at, len, value) in spans {
        out.push_str(&body[cursor..at]);
        out.push_str(value);
        cursor = at + len;
    }
    out.push_str(&body[cursor..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_templates_are_well_formed() {
        assert!(validate(builtin_weighted_template().body()).is_empty());
        assert!(validate(builtin_baseline_template().body()).is_empty());
    }

    #[test]
    fn weighted_template_names_every_verdict_field() {
        let body = builtin_weighted_template().body().to_string();
        for key in [
            "semantic_similarity",
            "fact_match_ratio",
            "critical_facts_missed",
            "supporting_facts_missed",
            "trivial_facts_missed",
            "final_score",
            "explanation",
        ] {
            assert!(body.contains(key), "missing {key}");
        }
    }

    #[test]
    fn baseline_template_never_mentions_fact_weighting() {
        let template = builtin_baseline_template();
        let body = template.body();
        assert!(!body.contains("critical"));
        assert!(!body.contains("supporting_facts_missed"));
        assert!(!body.contains("trivial"));
    }

    #[test]
    fn baseline_and_weighted_renders_differ() {
        let a = render(&builtin_weighted_template(), "x", "y").unwrap();
        let b = render(&builtin_baseline_template(), "x", "y").unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn validate_reports_all_issues_on_empty_body() {
        assert_eq!(
            validate(""),
            vec![
                TemplateIssue::Empty,
                TemplateIssue::MissingPlaceholder(AI_PLACEHOLDER),
                TemplateIssue::MissingPlaceholder(GOLD_PLACEHOLDER),
            ]
        );
    }

    #[test]
    fn validate_catches_duplicates() {
        let body = "a {ai_response} b {ai_response} c {gold_response}";
        assert_eq!(
            validate(body),
            vec![TemplateIssue::DuplicatePlaceholder(AI_PLACEHOLDER)]
        );
    }

    #[test]
    fn render_rejects_empty_inputs() {
        let t = builtin_weighted_template();
        assert_eq!(
            render(&t, "", "gold").unwrap_err(),
            PromptError::EmptyInput("ai_response")
        );
        assert_eq!(
            render(&t, "ai", "").unwrap_err(),
            PromptError::EmptyInput("gold_response")
        );
    }

    #[test]
    fn inputs_are_not_rescanned_for_placeholders() {
        let t = PromptTemplate::new(
            PromptKind::Weighted,
            "A: {ai_response}\nG: {gold_response}\n",
        )
        .unwrap();
        let out = render(&t, "contains {gold_response} literally", "gold").unwrap();
        assert_eq!(out, "A: contains {gold_response} literally\nG: gold\n");
    }

    #[test]
    fn render_is_agnostic_to_placeholder_order() {
        let t = PromptTemplate::new(
            PromptKind::Weighted,
            "G: {gold_response} / A: {ai_response}",
        )
        .unwrap();
        assert_eq!(render(&t, "a", "g").unwrap(), "G: g / A: a");
    }
}
