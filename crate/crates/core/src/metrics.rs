//! Threshold-free ranking metrics and multi-run aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("metric needs at least one positive and one negative score")]
    EmptySide,
    #[error("non-finite score")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredPairs {
    pub positives: Vec<f64>,
    pub negatives: Vec<f64>,
}

impl ScoredPairs {
    pub fn new(positives: Vec<f64>, negatives: Vec<f64>) -> Self {
        Self {
            positives,
            negatives,
        }
    }

    fn check(&self) -> Result<(), MetricError> {
        if self.positives.is_empty() || self.negatives.is_empty() {
            return Err(MetricError::EmptySide);
        }
        if !self
            .positives
            .iter()
            .chain(&self.negatives)
            .all(|x| x.is_finite())
        {
            return Err(MetricError::NonFinite);
        }
        Ok(())
    }

    /// All scores labelled (`true` = positive), sorted by descending score
    /// with negatives first among ties.
    fn ranked(&self) -> Vec<(f64, bool)> {
        let mut all: Vec<(f64, bool)> = self
            .positives
            .iter()
            .map(|&s| (s, true))
            .chain(self.negatives.iter().map(|&s| (s, false)))
            .collect();
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        all
    }
}

/// ROC AUC as the Mann–Whitney statistic: the fraction of (positive,
/// negative) pairs ordered correctly, ties counting one half. Computed from
/// rank sums with midranks for tied groups.
pub fn roc_auc(s: &ScoredPairs) -> Result<f64, MetricError> {
    s.check()?;
    let ranked = s.ranked();
    let n_pos = s.positives.len() as f64;
    let n_neg = s.negatives.len() as f64;
    // ascending ranks: position k in descending order has rank len - k
    let len = ranked.len();
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < len {
        let mut end = start + 1;
        while end < len && ranked[end].0 == ranked[start].0 {
            end += 1;
        }
        // ranks len-start down to len-end+1, averaged
        let mid = (2 * len - start - end + 1) as f64 / 2.0;
        let pos_in_group = ranked[start..end].iter().filter(|r| r.1).count() as f64;
        pos_rank_sum += mid * pos_in_group;
        start = end;
    }
    let u = pos_rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}

/// Average precision: mean over positives of precision at the positive's
/// rank. Scores sort descending and, at equal score, negatives rank above
/// positives, so ties never inflate the result.
pub fn average_precision(s: &ScoredPairs) -> Result<f64, MetricError> {
    s.check()?;
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &(_, positive)) in s.ranked().iter().enumerate() {
        if positive {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Ok(sum / s.positives.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub auc: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub auc_runs: Vec<f64>,
    pub ap_runs: Vec<f64>,
    pub auc: MeanStderr,
    pub ap: MeanStderr,
    /// Set when only one run was aggregated, so the standard error is undefined (reported as 0).
    pub single_run: bool,
}

fn mean_stderr(xs: &[f64]) -> MeanStderr {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return MeanStderr { mean, stderr: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    MeanStderr {
        mean,
        stderr: var.sqrt() / n.sqrt(),
    }
}

/// Mean and standard error (sample standard deviation over √n) of each
/// metric. Panics on an empty slice.
pub fn aggregate_runs(runs: &[RunMetrics]) -> RunSummary {
    assert!(!runs.is_empty(), "aggregate_runs needs at least one run");
    let auc_runs: Vec<f64> = runs.iter().map(|r| r.auc).collect();
    let ap_runs: Vec<f64> = runs.iter().map(|r| r.ap).collect();
    if runs.len() == 1 {
        log::warn!("single run: standard error reported as 0");
    }
    RunSummary {
        auc: mean_stderr(&auc_runs),
        ap: mean_stderr(&ap_runs),
        single_run: runs.len() == 1,
        auc_runs,
        ap_runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    fn sp(p: &[f64], n: &[f64]) -> ScoredPairs {
        ScoredPairs::new(p.to_vec(), n.to_vec())
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&sp(&[0.9, 0.8], &[0.1, 0.2])).unwrap(), 1.0);
        assert_eq!(roc_auc(&sp(&[0.3, 0.3], &[0.3, 0.3, 0.3])).unwrap(), 0.5);
        assert_eq!(roc_auc(&sp(&[0.8, 0.4], &[0.6, 0.2])).unwrap(), 0.75);
        assert_eq!(roc_auc(&sp(&[], &[0.1])), Err(MetricError::EmptySide));
        assert_eq!(
            roc_auc(&sp(&[f64::NAN], &[0.1])),
            Err(MetricError::NonFinite)
        );
    }

    #[test]
    fn ap_examples() {
        assert_eq!(
            average_precision(&sp(&[0.9, 0.7], &[0.2, 0.1])).unwrap(),
            1.0
        );
        assert_eq!(average_precision(&sp(&[0.1], &[0.9])).unwrap(), 0.5);
        let v = average_precision(&sp(&[0.8, 0.4], &[0.6, 0.2])).unwrap();
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        // tie: negative ranked first
        assert_eq!(average_precision(&sp(&[0.5], &[0.5])).unwrap(), 0.5);
        assert_eq!(
            average_precision(&sp(&[0.5], &[])),
            Err(MetricError::EmptySide)
        );
    }

    #[test]
    fn aggregation() {
        let r = |auc| RunMetrics { auc, ap: auc };
        let s = aggregate_runs(&[r(0.8), r(0.8), r(0.8)]);
        assert!((s.auc.mean - 0.8).abs() < 1e-15);
        assert!(s.auc.stderr < 1e-15);
        assert!(!s.single_run);

        let s = aggregate_runs(&[r(0.7), r(0.9)]);
        assert!((s.auc.mean - 0.8).abs() < 1e-12);
        assert!((s.auc.stderr - 0.1).abs() < 1e-12);

        let s = aggregate_runs(&[r(0.84)]);
        assert_eq!(s.auc.mean, 0.84);
        assert_eq!(s.auc.stderr, 0.0);
        assert!(s.single_run);
    }

    proptest! {
        #[test]
        fn auc_monotone_invariance_and_label_swap(
            pos in proptest::collection::vec(0u8..20, 1..40),
            neg in proptest::collection::vec(0u8..20, 1..40),
        ) {
            let p: Vec<f64> = pos.iter().map(|&x| x as f64 / 10.0).collect();
            let n: Vec<f64> = neg.iter().map(|&x| x as f64 / 10.0).collect();
            let auc = roc_auc(&sp(&p, &n)).unwrap();
            let tp: Vec<f64> = p.iter().map(|x| 2.0 * x + 1.0).collect();
            let tn: Vec<f64> = n.iter().map(|x| 2.0 * x + 1.0).collect();
            prop_assert!((roc_auc(&sp(&tp, &tn)).unwrap() - auc).abs() < 1e-12);
            prop_assert!((roc_auc(&sp(&n, &p)).unwrap() - (1.0 - auc)).abs() < 1e-12);
            let ap = average_precision(&sp(&p, &n)).unwrap();
            prop_assert!(ap > 0.0 && ap <= 1.0);
        }
    }
}
