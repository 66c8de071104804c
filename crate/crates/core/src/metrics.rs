//! Run-level metrics: human alignment rate, improvement over baseline, and
//! score-distribution summaries.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("decision and label vectors differ in length ({decisions} vs {labels})")]
    LengthMismatch { decisions: usize, labels: usize },
    #[error("metric input must be nonempty")]
    Empty,
    #[error("score {0} lies outside [0, 1]")]
    OutOfRange(f64),
    #[error("histogram needs at least one bin")]
    NoBins,
}

/// Percentage of judge decisions that agree with the paired human labels:
/// `100 * agreements / n`. Symmetric in true/false agreement and invariant
/// under flipping both vectors.
pub fn human_alignment_rate(decisions: &[bool], human_labels: &[bool]) -> Result<f64, MetricsError> {
    if decisions.len() != human_labels.len() {
        return Err(MetricsError::LengthMismatch {
            decisions: decisions.len(),
            labels: human_labels.len(),
        });
    }
    if decisions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let agreements = decisions
        .iter()
        .zip(human_labels)
        .filter(|(d, h)| d == h)
        .count();
    Ok(100.0 * agreements as f64 / decisions.len() as f64)
}

/// Mean HAR of the treated runs minus the baseline HAR, in percentage
/// points. Positive means the treatment helped.
pub fn improvement(baseline_har: f64, treated_hars: &[f64]) -> Result<f64, MetricsError> {
    if treated_hars.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mean = treated_hars.iter().sum::<f64>() / treated_hars.len() as f64;
    Ok(mean - baseline_har)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

/// Five-number-style summary plus a fixed-bin histogram over [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub histogram: Vec<HistogramBin>,
}

/// Quantile by linear interpolation between order statistics at rank
/// `p * (n - 1)`. `sorted` must be ascending and nonempty.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = p * (n - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Summarize final scores: quartiles by linear interpolation and a histogram
/// of `bins` equal-width buckets over [0, 1]. Every bucket is half-open
/// `[lower, upper)` except the last, which includes 1.0.
pub fn score_distribution(scores: &[f64], bins: usize) -> Result<DistributionSummary, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    if bins == 0 {
        return Err(MetricsError::NoBins);
    }
    if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricsError::OutOfRange(bad));
    }

    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut counts = vec![0usize; bins];
    for &s in scores {
        let idx = ((s * bins as f64).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    let width = 1.0 / bins as f64;
    let histogram = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| HistogramBin {
            lower: i as f64 * width,
            upper: if i + 1 == bins { 1.0 } else { (i + 1) as f64 * width },
            count,
        })
        .collect();

    Ok(DistributionSummary {
        n: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        histogram,
    })
}
