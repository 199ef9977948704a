//! Utility metrics for binary classifiers.

use fairlink::{Error, Result};

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Validation(format!("length mismatch: {a} vs {b}")));
    }
    if a == 0 {
        return Err(Error::UndefinedMetric("no samples".into()));
    }
    Ok(())
}

/// F1 of the positive class. When the truth is constant the constant class
/// is treated as positive.
pub fn f1_score(preds: &[u8], truth: &[u8]) -> Result<f64> {
    check_lengths(preds.len(), truth.len())?;
    let positive = if truth.iter().all(|&t| t == truth[0]) { truth[0] } else { 1 };
    let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
    for (&p, &t) in preds.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fne += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fne) as f64)
}

fn class_counts(truth: &[u8]) -> Result<(usize, usize)> {
    let pos = truth.iter().filter(|&&t| t == 1).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, with
/// average ranks for tied scores.
pub fn roc_auc(scores: &[f64], truth: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    let (pos, neg) = class_counts(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += avg * order[start..=end].iter().filter(|&&i| truth[i] == 1).count() as f64;
        start = end + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

/// Trapezoidal integration of the ROC curve, one vertex per distinct
/// threshold.
pub fn roc_auc_trapezoid(scores: &[f64], truth: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), truth.len())?;
    let (pos, neg) = class_counts(truth)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let (mut prev_tpr, mut prev_fpr) = (0.0, 0.0);
    let mut area = 0.0;
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if truth[order[k]] == 1 { tp += 1 } else { fp += 1 }
            k += 1;
        }
        let tpr = tp as f64 / pos as f64;
        let fpr = fp as f64 / neg as f64;
        area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
        prev_tpr = tpr;
        prev_fpr = fpr;
    }
    Ok(area)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: f64::NAN, std: f64::NAN };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_by_hand() {
        assert_eq!(f1_score(&[1, 1, 0, 0], &[1, 0, 1, 0]).unwrap(), 0.5);
        assert_eq!(f1_score(&[0, 0], &[1, 0]).unwrap(), 0.0);
        assert_eq!(f1_score(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn auc_by_hand() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let t = [0, 0, 1, 1];
        assert!((roc_auc(&s, &t).unwrap() - 0.75).abs() < 1e-15);
        assert!((roc_auc_trapezoid(&s, &t).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(roc_auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn summary_of_single_value_has_zero_std() {
        assert_eq!(Summary::of(&[0.3]), Summary { mean: 0.3, std: 0.0 });
    }
}
