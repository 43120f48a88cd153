//! Node-classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub micro_f1: f64,
    pub support: usize,
}

/// Pooled counts over every class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PooledCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl PooledCounts {
    /// `2TP / (2TP + FP + FN)`, i.e. the harmonic mean of pooled precision
    /// and recall.
    pub fn micro_f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return 0.0;
        }
        (2 * self.tp) as f64 / denom as f64
    }
}

/// Per-class one-vs-rest counts summed over classes.
pub fn pooled_counts(predictions: &[usize], labels: &[usize]) -> PooledCounts {
    let classes = predictions
        .iter()
        .chain(labels)
        .copied()
        .max()
        .map_or(0, |m| m + 1);
    let mut per_class = vec![PooledCounts::default(); classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        if p == y {
            per_class[y].tp += 1;
        } else {
            per_class[p].fp += 1;
            per_class[y].fn_ += 1;
        }
    }
    per_class
        .iter()
        .fold(PooledCounts::default(), |acc, c| PooledCounts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        })
}

/// Accuracy and micro-F1 of node-indexed `predictions` over `mask`.
/// Single-label predictions make the two equal; a mismatch is reported as
/// an error.
pub fn compute_metrics(
    predictions: &[usize],
    labels: &[Option<usize>],
    mask: &[usize],
) -> Result<Metrics, BenchError> {
    if mask.is_empty() {
        return Err(BenchError::Argument("empty evaluation mask".into()));
    }
    let mut preds = Vec::with_capacity(mask.len());
    let mut truth = Vec::with_capacity(mask.len());
    for &i in mask {
        let (Some(&p), Some(&Some(y))) = (predictions.get(i), labels.get(i)) else {
            return Err(BenchError::Argument(format!(
                "node {i} lacks a prediction or label"
            )));
        };
        preds.push(p);
        truth.push(y);
    }
    let correct = preds.iter().zip(&truth).filter(|(p, y)| p == y).count();
    let accuracy = correct as f64 / mask.len() as f64;
    let micro_f1 = pooled_counts(&preds, &truth).micro_f1();
    if micro_f1 != accuracy {
        return Err(BenchError::MetricIdentity { accuracy, micro_f1 });
    }
    Ok(Metrics {
        accuracy,
        micro_f1,
        support: mask.len(),
    })
}

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn some(v: &[usize]) -> Vec<Option<usize>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn all_correct() {
        let m = compute_metrics(&[0, 1, 2], &some(&[0, 1, 2]), &[0, 1, 2]).unwrap();
        assert_eq!((m.accuracy, m.micro_f1, m.support), (1.0, 1.0, 3));
    }

    #[test]
    fn half_correct() {
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        let mut preds = labels.clone();
        for p in preds.iter_mut().take(5) {
            *p = (*p + 1) % 3;
        }
        let mask: Vec<usize> = (0..10).collect();
        let m = compute_metrics(&preds, &some(&labels), &mask).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.micro_f1, 0.5);
    }

    #[test]
    fn mask_restricts() {
        let m = compute_metrics(&[0, 0, 1], &[Some(0), None, Some(0)], &[0, 2]).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert!(compute_metrics(&[0], &[Some(0)], &[]).is_err());
        assert!(compute_metrics(&[0, 1], &[Some(0), None], &[1]).is_err());
    }

    #[test]
    fn mean_std_needs_two_runs() {
        assert_eq!(mean_std(&[]), (None, None));
        assert_eq!(mean_std(&[0.5]), (Some(0.5), None));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }
}
