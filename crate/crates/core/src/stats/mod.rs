//! One-way ANOVA and the Tukey HSD post-hoc test, built on the special
//! functions and quadrature in the submodules.

pub mod special;
mod studentized_range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use special::regularized_incomplete_beta;
pub use studentized_range::studentized_range_sf;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least two groups, got {0}")]
    TooFewGroups(usize),
    #[error("group {label:?} has {n} observations, need at least 2")]
    GroupTooSmall { label: String, n: usize },
    #[error("within-group variance is zero; F statistic is undefined")]
    DegenerateVariance,
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

/// Result of a one-way ANOVA over k groups with N observations in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f_stat: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

/// One Tukey HSD pairwise comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub group_a: String,
    pub group_b: String,
    pub mean_diff: f64,
    pub q_stat: f64,
    pub p_adj: f64,
    pub reject_at_alpha: bool,
}

/// Survival function of the F distribution: P(F(d1, d2) > f).
///
/// Computed as I_x(d2/2, d1/2) with x = d2 / (d2 + d1·f).
pub fn f_sf(f: f64, d1: usize, d2: usize) -> f64 {
    assert!(f >= 0.0, "F statistic must be nonnegative");
    assert!(d1 >= 1 && d2 >= 1);
    if f == 0.0 {
        return 1.0;
    }
    let d1 = d1 as f64;
    let d2 = d2 as f64;
    let x = d2 / (d2 + d1 * f);
    regularized_incomplete_beta(x, 0.5 * d2, 0.5 * d1)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn validate_groups<T: AsRef<[f64]>>(
    groups: &[T],
    labels: impl Fn(usize) -> String,
) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.as_ref().len() < 2 {
            return Err(StatsError::GroupTooSmall {
                label: labels(i),
                n: g.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// One-way ANOVA: partitions total variation into between-group and
/// within-group sums of squares and tests the F ratio.
pub fn one_way_anova<T: AsRef<[f64]>>(groups: &[T]) -> Result<AnovaResult, StatsError> {
    validate_groups(groups, |i| format!("group {i}"))?;

    let k = groups.len();
    let n_total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand_mean =
        groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / n_total as f64;

    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand_mean).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }

    if ss_within == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }

    let df_between = k - 1;
    let df_within = n_total - k;
    let f_stat = (ss_between / df_between as f64) / (ss_within / df_within as f64);
    let p_value = f_sf(f_stat, df_between, df_within);

    Ok(AnovaResult {
        f_stat,
        df_between,
        df_within,
        p_value,
        ss_between,
        ss_within,
    })
}

/// Tukey HSD over labeled groups, in the Tukey-Kramer form so unequal group
/// sizes are handled; with equal sizes it reduces to the classic test.
/// Comparisons are emitted in lexicographic label order.
pub fn tukey_hsd(
    groups: &[(String, Vec<f64>)],
    alpha: f64,
) -> Result<Vec<PairwiseComparison>, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    validate_groups(
        &groups.iter().map(|(_, g)| g.as_slice()).collect::<Vec<_>>(),
        |i| groups[i].0.clone(),
    )?;

    let k = groups.len();
    let n_total: usize = groups.iter().map(|(_, g)| g.len()).sum();
    let df_within = n_total - k;

    let mut ss_within = 0.0;
    for (_, g) in groups {
        let m = mean(g);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    if ss_within == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let ms_within = ss_within / df_within as f64;

    let mut sorted: Vec<&(String, Vec<f64>)> = groups.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));

    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in (i + 1)..k {
            let (label_a, xs_a) = sorted[i];
            let (label_b, xs_b) = sorted[j];
            let mean_diff = mean(xs_a) - mean(xs_b);
            let se = (0.5 * ms_within * (1.0 / xs_a.len() as f64 + 1.0 / xs_b.len() as f64))
                .sqrt();
            let q_stat = mean_diff.abs() / se;
            let p_adj = studentized_range_sf(q_stat, k, df_within);
            out.push(PairwiseComparison {
                group_a: label_a.clone(),
                group_b: label_b.clone(),
                mean_diff,
                q_stat,
                p_adj,
                reject_at_alpha: p_adj < alpha,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example_groups() -> Vec<Vec<f64>> {
        vec![vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![6.0, 7.0, 8.0]]
    }

    #[test]
    fn anova_closed_form_example() {
        let r = one_way_anova(&example_groups()).unwrap();
        assert_eq!(r.f_stat, 21.0);
        assert_eq!(r.df_between, 2);
        assert_eq!(r.df_within, 6);
        assert_abs_diff_eq!(r.ss_between, 42.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.ss_within, 6.0, epsilon = 1e-12);
        // closed form for d1 = 2: (1 + 2F/d2)^(-d2/2) = 8^-3
        assert_abs_diff_eq!(r.p_value, 1.0 / 512.0, epsilon = 1e-9);
    }

    #[test]
    fn anova_equal_means_gives_f_zero() {
        let r = one_way_anova(&[vec![1.0, 3.0], vec![2.0, 2.0], vec![1.0, 3.0]]).unwrap();
        assert_eq!(r.f_stat, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn anova_rejects_single_group() {
        assert_eq!(
            one_way_anova(&[vec![1.0, 2.0]]).unwrap_err(),
            StatsError::TooFewGroups(1)
        );
    }

    #[test]
    fn anova_rejects_zero_variance() {
        assert_eq!(
            one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap_err(),
            StatsError::DegenerateVariance
        );
    }

    #[test]
    fn anova_shift_and_scale_invariance() {
        let base = one_way_anova(&example_groups()).unwrap();
        let shifted: Vec<Vec<f64>> = example_groups()
            .iter()
            .map(|g| g.iter().map(|x| x + 100.0).collect())
            .collect();
        let scaled: Vec<Vec<f64>> = example_groups()
            .iter()
            .map(|g| g.iter().map(|x| x * -3.5).collect())
            .collect();
        assert_abs_diff_eq!(one_way_anova(&shifted).unwrap().f_stat, base.f_stat, epsilon = 1e-9);
        assert_abs_diff_eq!(one_way_anova(&scaled).unwrap().f_stat, base.f_stat, epsilon = 1e-9);
    }

    #[test]
    fn anova_sum_of_squares_identity() {
        let groups = example_groups();
        let r = one_way_anova(&groups).unwrap();
        let all: Vec<f64> = groups.iter().flatten().copied().collect();
        let grand = all.iter().sum::<f64>() / all.len() as f64;
        let ss_total: f64 = all.iter().map(|x| (x - grand).powi(2)).sum();
        assert_abs_diff_eq!(
            r.ss_between + r.ss_within,
            ss_total,
            epsilon = 1e-9 * ss_total
        );
    }

    #[test]
    fn f_sf_boundaries_and_symmetry() {
        assert_eq!(f_sf(0.0, 3, 7), 1.0);
        for d in 1..=10 {
            // X ~ F(d,d) implies 1/X ~ F(d,d), so the median is 1.
            assert_abs_diff_eq!(f_sf(1.0, d, d), 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn tukey_example_pair() {
        let groups = vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0]),
            ("b".to_string(), vec![2.0, 3.0, 4.0]),
            ("c".to_string(), vec![6.0, 7.0, 8.0]),
        ];
        let cmp = tukey_hsd(&groups, 0.05).unwrap();
        assert_eq!(cmp.len(), 3);
        let ac = cmp.iter().find(|c| c.group_a == "a" && c.group_b == "c").unwrap();
        // q = 5 / sqrt(MSW/2 · (1/3 + 1/3)) with MSW = 1
        assert_abs_diff_eq!(ac.q_stat, 5.0 * 3.0f64.sqrt(), epsilon = 1e-12);
        assert!(ac.reject_at_alpha);
        assert!(ac.p_adj < 0.01);
    }

    #[test]
    fn tukey_identical_groups_no_rejection() {
        let groups = vec![
            ("x".to_string(), vec![1.0, 3.0]),
            ("y".to_string(), vec![1.0, 3.0]),
        ];
        let cmp = tukey_hsd(&groups, 0.05).unwrap();
        assert_eq!(cmp.len(), 1);
        assert_eq!(cmp[0].mean_diff, 0.0);
        assert_eq!(cmp[0].q_stat, 0.0);
        assert_eq!(cmp[0].p_adj, 1.0);
        assert!(!cmp[0].reject_at_alpha);
    }

    #[test]
    fn tukey_pair_count_and_order() {
        let groups: Vec<(String, Vec<f64>)> = ["d", "b", "a", "c"]
            .iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), vec![i as f64, i as f64 + 1.0]))
            .collect();
        let cmp = tukey_hsd(&groups, 0.05).unwrap();
        assert_eq!(cmp.len(), 6);
        let pairs: Vec<(String, String)> = cmp
            .iter()
            .map(|c| (c.group_a.clone(), c.group_b.clone()))
            .collect();
        let mut expected = pairs.clone();
        expected.sort();
        assert_eq!(pairs, expected, "pairs must come out lexicographically");
        assert!(pairs.contains(&("a".to_string(), "d".to_string())));
    }

    #[test]
    fn tukey_largest_gap_has_smallest_p() {
        let groups = vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0]),
            ("b".to_string(), vec![4.0, 5.0, 6.0]),
            ("c".to_string(), vec![9.0, 10.0, 11.0]),
        ];
        let cmp = tukey_hsd(&groups, 0.05).unwrap();
        let widest = cmp
            .iter()
            .max_by(|x, y| x.mean_diff.abs().partial_cmp(&y.mean_diff.abs()).unwrap())
            .unwrap();
        let min_p = cmp.iter().map(|c| c.p_adj).fold(f64::INFINITY, f64::min);
        assert_eq!(widest.p_adj, min_p);
    }
}
