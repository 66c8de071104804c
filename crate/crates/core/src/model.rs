//! Shared domain types: evaluation records, judge verdicts, and the policy
//! that turns a verdict into a pass/fail decision.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("record {id:?}: field {field} must be nonempty")]
    EmptyField { id: String, field: &'static str },
    #[error("verdict field {0} must lie in [0, 1]")]
    VerdictOutOfRange(&'static str),
    #[error("verdict explanation must be nonempty")]
    EmptyExplanation,
    #[error("decision threshold must lie in [0, 1], got {0}")]
    BadThreshold(f64),
    #[error("unknown decision policy {0:?} (expected strict, threshold:T, or hybrid:T)")]
    BadPolicy(String),
}

/// One retrieved context document attached to an evaluation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDoc {
    pub doc_uri: String,
    pub content: String,
}

/// One dataset row: a user query, the gold response, and the candidate
/// response to be judged, plus an optional human pass/fail label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub request_id: String,
    pub request: String,
    pub expected_response: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_retrieved_context: Option<Vec<ContextDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub human_label: Option<bool>,
}

impl EvalRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        let checks = [
            ("request_id", &self.request_id),
            ("request", &self.request),
            ("expected_response", &self.expected_response),
            ("response", &self.response),
        ];
        for (field, value) in checks {
            if value.is_empty() {
                return Err(ModelError::EmptyField {
                    id: self.request_id.clone(),
                    field,
                });
            }
        }
        Ok(())
    }
}

/// The seven-field JSON verdict the judge LLM must emit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub semantic_similarity: f64,
    pub fact_match_ratio: f64,
    pub critical_facts_missed: u32,
    pub supporting_facts_missed: u32,
    pub trivial_facts_missed: u32,
    pub final_score: f64,
    pub explanation: String,
}

impl Verdict {
    pub fn validate(&self) -> Result<(), ModelError> {
        let reals = [
            ("semantic_similarity", self.semantic_similarity),
            ("fact_match_ratio", self.fact_match_ratio),
            ("final_score", self.final_score),
        ];
        for (field, value) in reals {
            if !(0.0..=1.0).contains(&value) {
                return Err(ModelError::VerdictOutOfRange(field));
            }
        }
        if self.explanation.is_empty() {
            return Err(ModelError::EmptyExplanation);
        }
        Ok(())
    }
}

/// How a verdict becomes a binary match decision.
///
/// `StrictFacts` is the default: a candidate matches the gold response iff
/// no critical and no supporting facts were missed; trivial misses are
/// tolerated by rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DecisionPolicy {
    #[default]
    StrictFacts,
    ScoreThreshold { threshold: f64 },
    Hybrid { threshold: f64 },
}

impl DecisionPolicy {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            DecisionPolicy::StrictFacts => Ok(()),
            DecisionPolicy::ScoreThreshold { threshold } | DecisionPolicy::Hybrid { threshold } => {
                if (0.0..=1.0).contains(&threshold) {
                    Ok(())
                } else {
                    Err(ModelError::BadThreshold(threshold))
                }
            }
        }
    }
}

impl fmt::Display for DecisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionPolicy::StrictFacts => write!(f, "strict"),
            DecisionPolicy::ScoreThreshold { threshold } => write!(f, "threshold:{threshold}"),
            DecisionPolicy::Hybrid { threshold } => write!(f, "hybrid:{threshold}"),
        }
    }
}

impl FromStr for DecisionPolicy {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let policy = if s == "strict" {
            DecisionPolicy::StrictFacts
        } else if let Some(t) = s.strip_prefix("threshold:") {
            let threshold = t.parse().map_err(|_| ModelError::BadPolicy(s.to_string()))?;
            DecisionPolicy::ScoreThreshold { threshold }
        } else if let Some(t) = s.strip_prefix("hybrid:") {
            let threshold = t.parse().map_err(|_| ModelError::BadPolicy(s.to_string()))?;
            DecisionPolicy::Hybrid { threshold }
        } else {
            return Err(ModelError::BadPolicy(s.to_string()));
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// Which of the two judging prompts produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    Baseline,
    Weighted,
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptKind::Baseline => write!(f, "baseline"),
            PromptKind::Weighted => write!(f, "weighted"),
        }
    }
}

/// Decide whether a verdict counts as a match under the given policy.
///
/// Total on valid verdicts; `Hybrid` is the conjunction of the other two.
pub fn decide_match(verdict: &Verdict, policy: &DecisionPolicy) -> bool {
    let strict = verdict.critical_facts_missed == 0 && verdict.supporting_facts_missed == 0;
    match *policy {
        DecisionPolicy::StrictFacts => strict,
        DecisionPolicy::ScoreThreshold { threshold } => verdict.final_score >= threshold,
        DecisionPolicy::Hybrid { threshold } => strict && verdict.final_score >= threshold,
    }
}

/// Either a parsed verdict or a marker describing why parsing failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum VerdictOutcome {
    Parsed { verdict: Verdict },
    Failed { reason: String },
}

impl VerdictOutcome {
    pub fn verdict(&self) -> Option<&Verdict> {
        match self {
            VerdictOutcome::Parsed { verdict } => Some(verdict),
            VerdictOutcome::Failed { .. } => None,
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, VerdictOutcome::Failed { .. })
    }
}

/// One judged record: the input, the raw judge output, the parsed verdict
/// (or failure marker), and the resulting decision.
///
/// `decision` is present iff the verdict parsed. `cache_hit` is runtime
/// bookkeeping and is not serialized, so a cold run and its warm replay
/// produce identical run files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgedRecord {
    pub record: EvalRecord,
    pub raw_response: String,
    pub verdict: VerdictOutcome,
    pub decision: Option<bool>,
    pub judge_model: String,
    pub prompt_kind: PromptKind,
    #[serde(skip_serializing, default)]
    pub cache_hit: bool,
}

impl JudgedRecord {
    /// Decision used for alignment bookkeeping: a record whose verdict could
    /// not be parsed counts as a non-match.
    pub fn effective_decision(&self) -> bool {
        self.decision.unwrap_or(false)
    }
}

/// One judge model's run over a whole evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub judge_model: String,
    pub prompt_kind: PromptKind,
    /// Judged records, sorted by `request_id`.
    pub judged: Vec<JudgedRecord>,
    /// Percentage of judge decisions agreeing with human labels; absent when
    /// no record carries a human label.
    pub har_percent: Option<f64>,
    /// `final_score` of every successfully parsed verdict, in record order.
    pub final_scores: Vec<f64>,
    /// Number of records whose verdict could not be parsed (including
    /// failed provider calls).
    pub failures: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn verdict(critical: u32, supporting: u32, trivial: u32, final_score: f64) -> Verdict {
        Verdict {
            semantic_similarity: 0.9,
            fact_match_ratio: 0.8,
            critical_facts_missed: critical,
            supporting_facts_missed: supporting,
            trivial_facts_missed: trivial,
            final_score,
            explanation: "test".to_string(),
        }
    }

    #[test]
    fn strict_tolerates_trivial_misses() {
        assert!(decide_match(&verdict(0, 0, 3, 0.92), &DecisionPolicy::StrictFacts));
    }

    #[test]
    fn strict_rejects_critical_miss_despite_high_score() {
        assert!(!decide_match(&verdict(1, 0, 0, 0.95), &DecisionPolicy::StrictFacts));
    }

    #[test]
    fn threshold_and_hybrid_differ_on_supporting_miss() {
        let v = verdict(0, 1, 0, 0.80);
        let threshold = DecisionPolicy::ScoreThreshold { threshold: 0.75 };
        let hybrid = DecisionPolicy::Hybrid { threshold: 0.75 };
        assert!(decide_match(&v, &threshold));
        assert!(!decide_match(&v, &hybrid));
    }

    #[test]
    fn policy_round_trips_through_strings() {
        for s in ["strict", "threshold:0.75", "hybrid:0.9"] {
            let p: DecisionPolicy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("threshold:1.5".parse::<DecisionPolicy>().is_err());
        assert!("loose".parse::<DecisionPolicy>().is_err());
    }

    #[test]
    fn record_validation_flags_empty_fields() {
        let rec = EvalRecord {
            request_id: "a".into(),
            request: "q".into(),
            expected_response: String::new(),
            response: "r".into(),
            expected_retrieved_context: None,
            human_label: None,
        };
        assert_eq!(
            rec.validate().unwrap_err(),
            ModelError::EmptyField {
                id: "a".into(),
                field: "expected_response"
            }
        );
    }

    fn arb_verdict() -> impl Strategy<Value = Verdict> {
        (
            0.0..=1.0f64,
            0.0..=1.0f64,
            0u32..4,
            0u32..4,
            0u32..4,
            0.0..=1.0f64,
        )
            .prop_map(|(ss, fmr, c, s, t, fs)| Verdict {
                semantic_similarity: ss,
                fact_match_ratio: fmr,
                critical_facts_missed: c,
                supporting_facts_missed: s,
                trivial_facts_missed: t,
                final_score: fs,
                explanation: "p".to_string(),
            })
    }

    fn arb_policy() -> impl Strategy<Value = DecisionPolicy> {
        prop_oneof![
            Just(DecisionPolicy::StrictFacts),
            (0.0..=1.0f64).prop_map(|threshold| DecisionPolicy::ScoreThreshold { threshold }),
            (0.0..=1.0f64).prop_map(|threshold| DecisionPolicy::Hybrid { threshold }),
        ]
    }

    proptest! {
        /// Fewer misses or a higher score can never flip a pass into a fail.
        #[test]
        fn decide_match_is_monotone(v in arb_verdict(), p in arb_policy()) {
            let before = decide_match(&v, &p);
            let mut better = v.clone();
            better.critical_facts_missed = better.critical_facts_missed.saturating_sub(1);
            better.supporting_facts_missed = better.supporting_facts_missed.saturating_sub(1);
            better.trivial_facts_missed = better.trivial_facts_missed.saturating_sub(1);
            better.final_score = (better.final_score + 0.1).min(1.0);
            if before {
                prop_assert!(decide_match(&better, &p));
            }
        }

        #[test]
        fn strict_ignores_trivial_and_similarity(v in arb_verdict()) {
            let mut other = v.clone();
            other.trivial_facts_missed = 99;
            other.semantic_similarity = 0.0;
            other.fact_match_ratio = 0.0;
            other.final_score = 0.0;
            prop_assert_eq!(
                decide_match(&v, &DecisionPolicy::StrictFacts),
                decide_match(&other, &DecisionPolicy::StrictFacts)
            );
        }

        #[test]
        fn hybrid_is_conjunction(v in arb_verdict(), t in 0.0..=1.0f64) {
            let hybrid = decide_match(&v, &DecisionPolicy::Hybrid { threshold: t });
            let strict = decide_match(&v, &DecisionPolicy::StrictFacts);
            let score = decide_match(&v, &DecisionPolicy::ScoreThreshold { threshold: t });
            prop_assert_eq!(hybrid, strict && score);
        }
    }
}
