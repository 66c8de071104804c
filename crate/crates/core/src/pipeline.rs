//! Orchestration: render, call, parse, decide — per record and per run.
//!
//! A run judges every record of an evaluation set with one provider and one
//! template, in parallel on a dedicated thread pool. Output order never
//! depends on scheduling: judged records are sorted by `request_id`, so the
//! same inputs produce byte-identical run files at any parallelism.

use crate::gateway::{CallCache, Gateway, GatewayError, ProviderConfig};
use crate::metrics;
use crate::model::{
    decide_match, DecisionPolicy, EvalRecord, JudgedRecord, PromptKind, RunResult, VerdictOutcome,
};
use crate::prompt::{builtin_baseline_template, builtin_weighted_template, render, PromptTemplate};
use crate::verdict::{parse_llm_output, ValidationPolicy};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("evaluation set is empty")]
    EmptyDataset,
    #[error("no judge providers supplied")]
    NoProviders,
    #[error("invalid record {id:?}: {detail}")]
    InvalidRecord { id: String, detail: String },
    #[error("failed to build thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// How verdicts are validated and turned into decisions for a run.
#[derive(Debug, Clone, Copy, Default)]
pub struct JudgePolicies {
    pub decision: DecisionPolicy,
    pub validation: ValidationPolicy,
}

/// Judge a single record. Never fails: rendering problems, provider
/// failures, and unparseable verdicts all land in
/// [`VerdictOutcome::Failed`] with a reason, leaving `decision` empty.
pub fn judge_record(
    record: &EvalRecord,
    template: &PromptTemplate,
    gateway: &Gateway,
    policies: &JudgePolicies,
    cache: Option<&CallCache>,
) -> JudgedRecord {
    let (raw_response, cache_hit, outcome) =
        match render(template, &record.response, &record.expected_response) {
            Ok(prompt) => {
                let request = gateway.request_for(prompt);
                let completion = match cache {
                    Some(cache) => gateway.cached_complete(&request, cache),
                    None => gateway.complete(&request),
                };
                match completion {
                    Ok(result) => {
                        let outcome = match parse_llm_output(&result.text, &policies.validation) {
                            Ok(parsed) => VerdictOutcome::Parsed {
                                verdict: parsed.verdict,
                            },
                            Err(err) => VerdictOutcome::Failed {
                                reason: err.to_string(),
                            },
                        };
                        (result.text, result.cache_hit, outcome)
                    }
                    Err(err) => (
                        String::new(),
                        false,
                        VerdictOutcome::Failed {
                            reason: format!("gateway: {err}"),
                        },
                    ),
                }
            }
            Err(err) => (
                String::new(),
                false,
                VerdictOutcome::Failed {
                    reason: format!("prompt: {err}"),
                },
            ),
        };

    let decision = outcome
        .verdict()
        .map(|verdict| decide_match(verdict, &policies.decision));
    JudgedRecord {
        record: record.clone(),
        raw_response,
        verdict: outcome,
        decision,
        judge_model: gateway.config().model.clone(),
        prompt_kind: template.kind(),
        cache_hit,
    }
}

/// Judge a whole evaluation set with one provider, building its gateway
/// from the config.
pub fn run_evaluation(
    dataset: &[EvalRecord],
    template: &PromptTemplate,
    provider: &ProviderConfig,
    policies: &JudgePolicies,
    parallelism: usize,
    cache: Option<&CallCache>,
) -> Result<RunResult, PipelineError> {
    let gateway = Gateway::for_config(provider)?;
    run_with_gateway(dataset, template, &gateway, policies, parallelism, cache)
}

/// Like [`run_evaluation`] but with a caller-supplied gateway (tests script
/// failure sequences this way).
pub fn run_with_gateway(
    dataset: &[EvalRecord],
    template: &PromptTemplate,
    gateway: &Gateway,
    policies: &JudgePolicies,
    parallelism: usize,
    cache: Option<&CallCache>,
) -> Result<RunResult, PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::EmptyDataset);
    }
    for record in dataset {
        record
            .validate()
            .map_err(|e| PipelineError::InvalidRecord {
                id: record.request_id.clone(),
                detail: e.to_string(),
            })?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| PipelineError::ThreadPool(e.to_string()))?;
    let mut judged: Vec<JudgedRecord> = pool.install(|| {
        dataset
            .par_iter()
            .map(|record| judge_record(record, template, gateway, policies, cache))
            .collect()
    });
    judged.sort_by(|a, b| a.record.request_id.cmp(&b.record.request_id));
    Ok(summarize_run(
        judged,
        gateway.config().model.clone(),
        template.kind(),
    ))
}

fn summarize_run(judged: Vec<JudgedRecord>, judge_model: String, prompt_kind: PromptKind) -> RunResult {
    let mut decisions = Vec::new();
    let mut labels = Vec::new();
    for j in &judged {
        if let Some(label) = j.record.human_label {
            decisions.push(j.effective_decision());
            labels.push(label);
        }
    }
    let har_percent = if labels.is_empty() {
        None
    } else {
        Some(metrics::human_alignment_rate(&decisions, &labels).expect("lengths match"))
    };
    let final_scores = judged
        .iter()
        .filter_map(|j| j.verdict.verdict().map(|v| v.final_score))
        .collect();
    let failures = judged.iter().filter(|j| j.verdict.is_failure()).count();
    RunResult {
        judge_model,
        prompt_kind,
        judged,
        har_percent,
        final_scores,
        failures,
    }
}

/// The two-step protocol: one pass with the plain baseline prompt, then one
/// weighted-prompt pass per judge provider. The baseline run is always
/// first in the returned vector.
pub fn run_two_step(
    dataset: &[EvalRecord],
    baseline_provider: &ProviderConfig,
    judge_providers: &[ProviderConfig],
    policies: &JudgePolicies,
    parallelism: usize,
    cache: Option<&CallCache>,
) -> Result<Vec<RunResult>, PipelineError> {
    if judge_providers.is_empty() {
        return Err(PipelineError::NoProviders);
    }
    let mut runs = Vec::with_capacity(judge_providers.len() + 1);
    runs.push(run_evaluation(
        dataset,
        &builtin_baseline_template(),
        baseline_provider,
        policies,
        parallelism,
        cache,
    )?);
    let weighted = builtin_weighted_template();
    for provider in judge_providers {
        runs.push(run_evaluation(
            dataset,
            &weighted,
            provider,
            policies,
            parallelism,
            cache,
        )?);
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{AttemptError, MockBackend, MockReply};
    use crate::prompt::builtin_weighted_template;
    use std::time::Duration;

    fn record(id: &str, response: &str, gold: &str, label: Option<bool>) -> EvalRecord {
        EvalRecord {
            request_id: id.to_string(),
            request: format!("question for {id}"),
            expected_response: gold.to_string(),
            response: response.to_string(),
            expected_retrieved_context: None,
            human_label: label,
        }
    }

    fn mock_gateway(model: &str) -> Gateway {
        Gateway::with_backend(Box::new(MockBackend::new()), ProviderConfig::mock(model))
    }

    #[test]
    fn exact_match_passes_and_mismatch_fails_under_strict() {
        let gateway = mock_gateway("judge");
        let template = builtin_weighted_template();
        let policies = JudgePolicies::default();

        let hit = judge_record(&record("a", "same", "same", None), &template, &gateway, &policies, None);
        assert_eq!(hit.decision, Some(true));

        let miss = judge_record(&record("b", "other", "gold", None), &template, &gateway, &policies, None);
        assert_eq!(miss.decision, Some(false));
        assert!(miss.verdict.verdict().unwrap().critical_facts_missed >= 1);
    }

    #[test]
    fn unparseable_reply_becomes_a_failure_not_a_crash() {
        let backend = MockBackend::scripted(vec![MockReply::Text("no json here".into())]);
        let gateway = Gateway::with_backend(Box::new(backend), ProviderConfig::mock("judge"));
        let judged = judge_record(
            &record("a", "x", "y", Some(true)),
            &builtin_weighted_template(),
            &gateway,
            &JudgePolicies::default(),
            None,
        );
        assert!(judged.decision.is_none());
        assert!(!judged.effective_decision());
        match &judged.verdict {
            VerdictOutcome::Failed { reason } => assert_eq!(reason, "NoJsonFound"),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn provider_error_is_captured_per_record() {
        let backend = MockBackend::scripted(vec![MockReply::Error(AttemptError::Auth {
            status: 401,
        })]);
        let mut config = ProviderConfig::mock("judge");
        config.max_retries = 0;
        let gateway = Gateway::with_backend(Box::new(backend), config)
            .with_retry_base(Duration::from_millis(1));
        let judged = judge_record(
            &record("a", "x", "y", None),
            &builtin_weighted_template(),
            &gateway,
            &JudgePolicies::default(),
            None,
        );
        match &judged.verdict {
            VerdictOutcome::Failed { reason } => assert!(reason.starts_with("gateway:"), "{reason}"),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn four_record_run_scores_seventy_five() {
        // Judge says match for a, b, c (exact) and mismatch for d; humans
        // agree except on c, so alignment is 3/4.
        let dataset = vec![
            record("a", "g1", "g1", Some(true)),
            record("b", "g2", "g2", Some(true)),
            record("c", "g3", "g3", Some(false)),
            record("d", "other", "g4", Some(false)),
        ];
        let run = run_with_gateway(
            &dataset,
            &builtin_weighted_template(),
            &mock_gateway("judge"),
            &JudgePolicies::default(),
            2,
            None,
        )
        .unwrap();
        assert_eq!(run.har_percent, Some(75.0));
        assert_eq!(run.failures, 0);
        assert_eq!(run.final_scores.len(), 4);
    }

    #[test]
    fn unlabeled_dataset_has_no_har() {
        let dataset = vec![record("a", "g", "g", None)];
        let run = run_with_gateway(
            &dataset,
            &builtin_weighted_template(),
            &mock_gateway("judge"),
            &JudgePolicies::default(),
            1,
            None,
        )
        .unwrap();
        assert_eq!(run.har_percent, None);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let err = run_with_gateway(
            &[],
            &builtin_weighted_template(),
            &mock_gateway("judge"),
            &JudgePolicies::default(),
            1,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, PipelineError::EmptyDataset));
    }

    #[test]
    fn output_is_sorted_and_complete_regardless_of_parallelism() {
        let mut dataset: Vec<EvalRecord> = (0..40)
            .map(|i| {
                let id = format!("rec-{i:03}");
                if i % 3 == 0 {
                    record(&id, "matching", "matching", Some(true))
                } else {
                    record(&id, &format!("cand {i}"), &format!("gold {i}"), Some(i % 2 == 0))
                }
            })
            .collect();
        dataset.reverse(); // feed out of order on purpose

        let serial = run_with_gateway(
            &dataset,
            &builtin_weighted_template(),
            &mock_gateway("judge"),
            &JudgePolicies::default(),
            1,
            None,
        )
        .unwrap();
        let parallel = run_with_gateway(
            &dataset,
            &builtin_weighted_template(),
            &mock_gateway("judge"),
            &JudgePolicies::default(),
            8,
            None,
        )
        .unwrap();

        assert_eq!(serial.judged.len(), dataset.len());
        let ids: Vec<&str> = serial.judged.iter().map(|j| j.record.request_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);

        let a = serde_json::to_string(&serial).unwrap();
        let b = serde_json::to_string(&parallel).unwrap();
        assert_eq!(a, b, "parallelism must not leak into results");
    }

    #[test]
    fn two_step_returns_baseline_first_then_each_judge() {
        let dataset = vec![
            record("a", "g", "g", Some(true)),
            record("b", "x", "y", Some(false)),
        ];
        let baseline = ProviderConfig::mock("baseline-judge");
        let judges = vec![ProviderConfig::mock("judge-a"), ProviderConfig::mock("judge-b")];
        let runs = run_two_step(&dataset, &baseline, &judges, &JudgePolicies::default(), 2, None).unwrap();
        assert_eq!(runs.len(), 3);
        assert_eq!(runs[0].prompt_kind, PromptKind::Baseline);
        assert_eq!(runs[0].judge_model, "baseline-judge");
        assert_eq!(runs[1].prompt_kind, PromptKind::Weighted);
        assert_eq!(runs[1].judge_model, "judge-a");
        assert_eq!(runs[2].judge_model, "judge-b");

        let none = run_two_step(&dataset, &baseline, &[], &JudgePolicies::default(), 1, None);
        assert!(matches!(none.unwrap_err(), PipelineError::NoProviders));
    }

    #[test]
    fn cold_and_warm_cache_runs_serialize_identically() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CallCache::open(dir.path().join("cache.jsonl")).unwrap();
        let dataset = vec![
            record("a", "g", "g", Some(true)),
            record("b", "x", "y", Some(false)),
        ];
        let gateway = mock_gateway("judge");
        let template = builtin_weighted_template();
        let policies = JudgePolicies::default();

        let cold =
            run_with_gateway(&dataset, &template, &gateway, &policies, 2, Some(&cache)).unwrap();
        assert!(cold.judged.iter().all(|j| !j.cache_hit));
        let warm =
            run_with_gateway(&dataset, &template, &gateway, &policies, 2, Some(&cache)).unwrap();
        assert!(warm.judged.iter().all(|j| j.cache_hit));
        assert_eq!(
            serde_json::to_string(&cold).unwrap(),
            serde_json::to_string(&warm).unwrap()
        );
        assert_eq!(cache.len(), 2);
    }
}
