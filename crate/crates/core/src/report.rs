//! Run artifacts: the versioned run file, markdown summaries, violin-plot
//! data, and the stats report.
//!
//! Everything here is byte-deterministic for identical inputs: struct
//! fields serialize in declaration order, floats use serde_json's shortest
//! round-trip form, and no timestamps or host details are embedded.

use crate::gateway::ProviderConfig;
use crate::metrics::{self, DistributionSummary};
use crate::model::{JudgedRecord, PromptKind, RunResult};
use crate::stats::{AnovaResult, PairwiseComparison};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const RUN_FILE_VERSION: u32 = 1;

/// Histogram resolution for violin/summary data.
pub const VIOLIN_BINS: usize = 20;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("failed to read {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("failed to write {path}: {detail}")]
    WriteFailed { path: String, detail: String },
    #[error("{path} is not a valid run file: {detail}")]
    BadRunFile { path: String, detail: String },
    #[error("run file {path} has unsupported version {version}")]
    UnsupportedVersion { path: String, version: u32 },
    #[error("no runs supplied")]
    NoRuns,
}

/// The exact configuration a run was produced under. The provider block
/// includes `api_key_env` — the *name* of the variable — but by
/// construction never the key itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigEcho {
    pub provider: ProviderConfig,
    pub prompt_kind: PromptKind,
    pub decision_policy: String,
    pub parallelism: usize,
}

/// Serialized form of one judged run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFile {
    pub version: u32,
    pub judge_model: String,
    pub config: RunConfigEcho,
    pub har_percent: Option<f64>,
    pub failures: usize,
    pub final_scores: Vec<f64>,
    pub records: Vec<JudgedRecord>,
}

pub fn build_run_file(
    result: RunResult,
    provider: &ProviderConfig,
    decision_policy: &str,
    parallelism: usize,
) -> RunFile {
    RunFile {
        version: RUN_FILE_VERSION,
        judge_model: result.judge_model,
        config: RunConfigEcho {
            provider: provider.clone(),
            prompt_kind: result.prompt_kind,
            decision_policy: decision_policy.to_string(),
            parallelism,
        },
        har_percent: result.har_percent,
        failures: result.failures,
        final_scores: result.final_scores,
        records: result.judged,
    }
}

/// Canonical serialization: pretty-printed JSON plus a trailing newline.
pub fn run_file_json(run: &RunFile) -> String {
    let mut text = serde_json::to_string_pretty(run).expect("run file serializes");
    text.push('\n');
    text
}

pub fn write_run_file(path: &Path, run: &RunFile) -> Result<(), ReportError> {
    std::fs::write(path, run_file_json(run)).map_err(|e| ReportError::WriteFailed {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

pub fn read_run_file(path: &Path) -> Result<RunFile, ReportError> {
    let raw = std::fs::read_to_string(path).map_err(|e| ReportError::Io {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let run: RunFile = serde_json::from_str(&raw).map_err(|e| ReportError::BadRunFile {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    if run.version != RUN_FILE_VERSION {
        return Err(ReportError::UnsupportedVersion {
            path: path.display().to_string(),
            version: run.version,
        });
    }
    Ok(run)
}

/// Human alignment rate with one decimal place, e.g. `85.9`.
pub fn format_har(har: f64) -> String {
    format!("{har:.1}")
}

/// p-values (and other probabilities) with four decimal places; anything
/// below 0.00005 therefore prints as `0.0000`.
pub fn format_p4(p: f64) -> String {
    format!("{p:.4}")
}

fn row_label(run: &RunFile) -> String {
    match run.config.prompt_kind {
        PromptKind::Baseline => format!("Baseline ({})", run.judge_model),
        PromptKind::Weighted => run.judge_model.clone(),
    }
}

/// Markdown summary across runs: a judge-by-judge alignment table and, when
/// both a baseline and weighted runs carry HAR values, the average
/// improvement in percentage points.
pub fn markdown_report(runs: &[RunFile]) -> Result<String, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let mut out = String::new();
    out.push_str("# Judge evaluation report\n\n");
    out.push_str("| Judge | Prompt | Human Alignment Rate (%) | Parse failures | Records |\n");
    out.push_str("| --- | --- | --- | --- | --- |\n");
    for run in runs {
        let har = run
            .har_percent
            .map(format_har)
            .unwrap_or_else(|| "n/a".to_string());
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row_label(run),
            run.config.prompt_kind,
            har,
            run.failures,
            run.records.len()
        ));
    }

    let baseline_har = runs
        .iter()
        .find(|r| r.config.prompt_kind == PromptKind::Baseline)
        .and_then(|r| r.har_percent);
    let treated: Vec<f64> = runs
        .iter()
        .filter(|r| r.config.prompt_kind == PromptKind::Weighted)
        .filter_map(|r| r.har_percent)
        .collect();
    if let Some(baseline) = baseline_har {
        if let Ok(delta) = metrics::improvement(baseline, &treated) {
            out.push_str(&format!(
                "\nAverage improvement over baseline: {} pp.\n",
                format_har(delta)
            ));
        }
    }
    Ok(out)
}

/// Scores for one run, ready for a violin or strip plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinSeries {
    pub label: String,
    pub n: usize,
    /// Ascending final scores of successfully parsed verdicts.
    pub scores: Vec<f64>,
    pub summary: Option<DistributionSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinData {
    pub series: Vec<ViolinSeries>,
}

/// Build per-run score series. A run where every verdict failed to parse is
/// still listed — with `n = 0`, no summary, and a warning — so its absence
/// from a plot is visible rather than silent.
pub fn violin_data(runs: &[RunFile]) -> Result<ViolinData, ReportError> {
    if runs.is_empty() {
        return Err(ReportError::NoRuns);
    }
    let series = runs
        .iter()
        .map(|run| {
            let mut scores = run.final_scores.clone();
            scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let summary = metrics::score_distribution(&scores, VIOLIN_BINS).ok();
            let warning = if scores.is_empty() {
                Some("no parsed verdicts in this run".to_string())
            } else {
                None
            };
            ViolinSeries {
                label: row_label(run),
                n: scores.len(),
                scores,
                summary,
                warning,
            }
        })
        .collect();
    Ok(ViolinData { series })
}

pub fn violin_json(data: &ViolinData) -> String {
    let mut text = serde_json::to_string_pretty(data).expect("violin data serializes");
    text.push('\n');
    text
}

/// ANOVA plus pairwise comparisons over run score distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub alpha: f64,
    pub groups: Vec<String>,
    pub anova: AnovaResult,
    pub comparisons: Vec<PairwiseComparison>,
}

pub fn stats_json(report: &StatsReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("stats report serializes");
    text.push('\n');
    text
}

pub fn stats_markdown(report: &StatsReport) -> String {
    let mut out = String::new();
    out.push_str("# Score distribution comparison\n\n");
    out.push_str(&format!(
        "One-way ANOVA: F({}, {}) = {:.4}, p = {}.\n\n",
        report.anova.df_between,
        report.anova.df_within,
        report.anova.f_stat,
        format_p4(report.anova.p_value)
    ));
    out.push_str(&format!(
        "Tukey HSD pairwise comparisons at alpha = {}:\n\n",
        report.alpha
    ));
    out.push_str("| Group1 | Group2 | Mean diff | q | p-adj | Reject |\n");
    out.push_str("| --- | --- | --- | --- | --- | --- |\n");
    for c in &report.comparisons {
        out.push_str(&format!(
            "| {} | {} | {:.4} | {:.4} | {} | {} |\n",
            c.group_a,
            c.group_b,
            c.mean_diff,
            c.q_stat,
            format_p4(c.p_adj),
            if c.reject_at_alpha { "yes" } else { "no" }
        ));
    }
    out
}

/// Group runs for the stats layer: `(label, final_scores)` per run, runs
/// with no parsed verdicts dropped, duplicate labels disambiguated with a
/// positional suffix.
pub fn score_groups(runs: &[RunFile]) -> Vec<(String, Vec<f64>)> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for run in runs {
        if run.final_scores.is_empty() {
            continue;
        }
        let base = row_label(run);
        let mut label = base.clone();
        let mut suffix = 2;
        while groups.iter().any(|(l, _)| *l == label) {
            label = format!("{base} #{suffix}");
            suffix += 1;
        }
        groups.push((label, run.final_scores.clone()));
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EvalRecord, Verdict, VerdictOutcome};

    fn sample_record(id: &str, score: f64) -> JudgedRecord {
        JudgedRecord {
            record: EvalRecord {
                request_id: id.into(),
                request: "q".into(),
                expected_response: "gold".into(),
                response: "cand".into(),
                expected_retrieved_context: None,
                human_label: Some(true),
            },
            raw_response: "{...}".into(),
            verdict: VerdictOutcome::Parsed {
                verdict: Verdict {
                    semantic_similarity: score,
                    fact_match_ratio: score,
                    critical_facts_missed: 0,
                    supporting_facts_missed: 0,
                    trivial_facts_missed: 0,
                    final_score: score,
                    explanation: "e".into(),
                },
            },
            decision: Some(true),
            judge_model: "judge-a".into(),
            prompt_kind: PromptKind::Weighted,
            cache_hit: false,
        }
    }

    fn sample_run(model: &str, kind: PromptKind, har: Option<f64>, scores: &[f64]) -> RunFile {
        let records: Vec<JudgedRecord> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| sample_record(&format!("r{i}"), s))
            .collect();
        RunFile {
            version: RUN_FILE_VERSION,
            judge_model: model.into(),
            config: RunConfigEcho {
                provider: ProviderConfig::mock(model),
                prompt_kind: kind,
                decision_policy: "strict".into(),
                parallelism: 4,
            },
            har_percent: har,
            failures: 0,
            final_scores: scores.to_vec(),
            records,
        }
    }

    #[test]
    fn run_file_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let run = sample_run("judge-a", PromptKind::Weighted, Some(85.9375), &[0.9, 1.0]);
        write_run_file(&path, &run).unwrap();
        let loaded = read_run_file(&path).unwrap();
        assert_eq!(run, loaded);
        // Serialization is stable across write → read → write.
        assert_eq!(run_file_json(&run), run_file_json(&loaded));
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let mut run = sample_run("judge-a", PromptKind::Weighted, None, &[0.5]);
        run.version = 99;
        std::fs::write(&path, serde_json::to_string(&run).unwrap()).unwrap();
        assert!(matches!(
            read_run_file(&path).unwrap_err(),
            ReportError::UnsupportedVersion { version: 99, .. }
        ));
    }

    #[test]
    fn display_rules_round_and_truncate() {
        assert_eq!(format_har(85.9375), "85.9");
        assert_eq!(format_har(95.83333333), "95.8");
        assert_eq!(format_p4(0.0039), "0.0039");
        assert_eq!(format_p4(3.5874e-8), "0.0000");
        assert_eq!(format_p4(1.0), "1.0000");
    }

    #[test]
    fn markdown_table_is_well_formed_and_reports_improvement() {
        let runs = vec![
            sample_run("base-judge", PromptKind::Baseline, Some(79.5), &[0.5, 0.6]),
            sample_run("judge-a", PromptKind::Weighted, Some(87.0), &[0.8, 0.9]),
            sample_run("judge-b", PromptKind::Weighted, Some(84.8), &[0.7, 0.95]),
        ];
        let md = markdown_report(&runs).unwrap();
        assert!(md.contains("| Baseline (base-judge) | baseline | 79.5 |"));
        assert!(md.contains("| judge-a | weighted | 87.0 |"));
        // (87.0 + 84.8)/2 - 79.5 = 6.4
        assert!(md.contains("Average improvement over baseline: 6.4 pp."), "{md}");

        let pipe_counts: Vec<usize> = md
            .lines()
            .filter(|l| l.starts_with('|'))
            .map(|l| l.matches('|').count())
            .collect();
        assert!(!pipe_counts.is_empty());
        assert!(pipe_counts.windows(2).all(|w| w[0] == w[1]), "ragged table: {md}");
    }

    #[test]
    fn missing_har_renders_as_na_without_improvement_line() {
        let runs = vec![sample_run("judge-a", PromptKind::Weighted, None, &[0.8])];
        let md = markdown_report(&runs).unwrap();
        assert!(md.contains("| judge-a | weighted | n/a |"));
        assert!(!md.contains("improvement"));
    }

    #[test]
    fn violin_lists_empty_runs_with_warning() {
        let runs = vec![
            sample_run("judge-a", PromptKind::Weighted, None, &[0.9, 0.1, 0.5]),
            sample_run("judge-b", PromptKind::Weighted, None, &[]),
        ];
        let data = violin_data(&runs).unwrap();
        assert_eq!(data.series[0].scores, vec![0.1, 0.5, 0.9]);
        assert!(data.series[0].summary.is_some());
        assert_eq!(data.series[1].n, 0);
        assert!(data.series[1].summary.is_none());
        assert!(data.series[1].warning.is_some());
    }

    #[test]
    fn score_groups_skip_empty_and_disambiguate() {
        let runs = vec![
            sample_run("judge-a", PromptKind::Weighted, None, &[0.9]),
            sample_run("judge-a", PromptKind::Weighted, None, &[0.8]),
            sample_run("judge-b", PromptKind::Weighted, None, &[]),
        ];
        let groups = score_groups(&runs);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].0, "judge-a");
        assert_eq!(groups[1].0, "judge-a #2");
    }

    #[test]
    fn stats_markdown_uses_the_p_display_rule() {
        let report = StatsReport {
            alpha: 0.05,
            groups: vec!["a".into(), "b".into(), "c".into()],
            anova: AnovaResult {
                f_stat: 5.0,
                df_between: 2,
                df_within: 573,
                p_value: 0.0039,
                ss_between: 1.0,
                ss_within: 2.0,
            },
            comparisons: vec![PairwiseComparison {
                group_a: "a".into(),
                group_b: "b".into(),
                mean_diff: 0.1234,
                q_stat: 10.3042,
                p_adj: 3.5874e-8,
                reject_at_alpha: true,
            }],
        };
        let md = stats_markdown(&report);
        assert!(md.contains("F(2, 573) = 5.0000, p = 0.0039"));
        assert!(md.contains("| a | b | 0.1234 | 10.3042 | 0.0000 | yes |"));
    }
}
