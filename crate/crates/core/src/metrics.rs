//! Group fairness and correlation measures.
//!
//! All statistical-parity variants work on a binary sensitive attribute.
//! Rates are empirical frequencies; the multi-class and soft forms are the
//! total-variation distance between the two per-group class distributions.

use std::f64::consts::FRAC_PI_2;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Tolerance on row sums accepted by [`delta_sp_soft`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Per-group class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    /// `group_sizes[g]` nodes carry sensitive value `g`.
    pub group_sizes: [usize; 2],
    /// `counts[g][k]`: nodes in group `g` assigned to class `k`.
    pub counts: [Vec<usize>; 2],
}

impl GroupStats {
    pub fn from_assignments(assignments: &[usize], sensitive: &[u8]) -> Result<Self> {
        check_lengths(assignments.len(), sensitive.len())?;
        let num_classes = assignments.iter().max().map_or(0, |m| m + 1);
        let mut counts = [vec![0usize; num_classes], vec![0usize; num_classes]];
        let mut group_sizes = [0usize; 2];
        for (&a, &s) in assignments.iter().zip(sensitive) {
            let g = group_index(s)?;
            group_sizes[g] += 1;
            counts[g][a] += 1;
        }
        let stats = Self {
            group_sizes,
            counts,
        };
        stats.require_both_groups()?;
        Ok(stats)
    }

    pub fn num_classes(&self) -> usize {
        self.counts[0].len()
    }

    /// `P(class = k | s = g)`.
    pub fn rate(&self, group: usize, class: usize) -> f64 {
        self.counts[group][class] as f64 / self.group_sizes[group] as f64
    }

    fn require_both_groups(&self) -> Result<()> {
        for (g, &n) in self.group_sizes.iter().enumerate() {
            if n == 0 {
                return Err(Error::UndefinedMetric(format!(
                    "sensitive group {g} is empty"
                )));
            }
        }
        Ok(())
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Validation(format!(
            "length mismatch: {a} predictions vs {b} sensitive values"
        )));
    }
    Ok(())
}

fn group_index(s: u8) -> Result<usize> {
    match s {
        0 | 1 => Ok(s as usize),
        v => Err(Error::Domain(format!("sensitive value {v} is not 0 or 1"))),
    }
}

/// `|P(ŷ=1 | s=0) − P(ŷ=1 | s=1)|`.
pub fn delta_sp_binary(preds: &[u8], sensitive: &[u8]) -> Result<f64> {
    check_lengths(preds.len(), sensitive.len())?;
    let mut positives = [0usize; 2];
    let mut sizes = [0usize; 2];
    for (&p, &s) in preds.iter().zip(sensitive) {
        let g = group_index(s)?;
        sizes[g] += 1;
        if p == 1 {
            positives[g] += 1;
        }
    }
    for (g, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::UndefinedMetric(format!("sensitive group {g} is empty")));
        }
    }
    let r0 = positives[0] as f64 / sizes[0] as f64;
    let r1 = positives[1] as f64 / sizes[1] as f64;
    Ok((r0 - r1).abs())
}

/// `½ Σ_k |P(ŷ=k | s=0) − P(ŷ=k | s=1)|` over hard class assignments.
pub fn delta_sp_multiclass(assignments: &[usize], sensitive: &[u8]) -> Result<f64> {
    let stats = GroupStats::from_assignments(assignments, sensitive)?;
    let mut total = 0.0;
    for k in 0..stats.num_classes() {
        total += (stats.rate(0, k) - stats.rate(1, k)).abs();
    }
    Ok(0.5 * total)
}

/// Per-group column means of a membership matrix: `[mean over s=0, mean over s=1]`.
pub(crate) fn group_means(memberships: &Array2<f64>, sensitive: &[u8]) -> Result<([Vec<f64>; 2], [usize; 2])> {
    check_lengths(memberships.nrows(), sensitive.len())?;
    let c = memberships.ncols();
    let mut sums = [vec![0.0; c], vec![0.0; c]];
    let mut sizes = [0usize; 2];
    for (row, &s) in memberships.rows().into_iter().zip(sensitive) {
        let g = group_index(s)?;
        sizes[g] += 1;
        for (acc, v) in sums[g].iter_mut().zip(row) {
            *acc += v;
        }
    }
    for (g, &n) in sizes.iter().enumerate() {
        if n == 0 {
            return Err(Error::UndefinedMetric(format!("sensitive group {g} is empty")));
        }
    }
    for g in 0..2 {
        let n = sizes[g] as f64;
        for v in sums[g].iter_mut() {
            *v /= n;
        }
    }
    Ok((sums, sizes))
}

pub(crate) fn check_row_stochastic(memberships: &Array2<f64>, tol: f64) -> Result<()> {
    for (i, row) in memberships.rows().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if !((sum - 1.0).abs() <= tol) || row.iter().any(|&v| v < 0.0) {
            return Err(Error::Validation(format!(
                "membership row {i} is not stochastic (sum {sum})"
            )));
        }
    }
    Ok(())
}

/// Differentiable statistical parity over soft memberships:
/// `½ Σ_k |mean_{s=0} C[·,k] − mean_{s=1} C[·,k]|`.
pub fn delta_sp_soft(memberships: &Array2<f64>, sensitive: &[u8]) -> Result<f64> {
    check_row_stochastic(memberships, ROW_SUM_TOLERANCE)?;
    delta_sp_soft_unchecked(memberships, sensitive)
}

pub(crate) fn delta_sp_soft_unchecked(memberships: &Array2<f64>, sensitive: &[u8]) -> Result<f64> {
    let ([m0, m1], _) = group_means(memberships, sensitive)?;
    let mut total = 0.0;
    for (a, b) in m0.iter().zip(&m1) {
        total += (a - b).abs();
    }
    Ok(0.5 * total)
}

/// Equal opportunity gap `|P(ŷ=1 | s=0, y=1) − P(ŷ=1 | s=1, y=1)|`.
pub fn delta_eo(preds: &[u8], sensitive: &[u8], truth: &[u8]) -> Result<f64> {
    check_lengths(preds.len(), sensitive.len())?;
    check_lengths(truth.len(), sensitive.len())?;
    let mut hits = [0usize; 2];
    let mut positives = [0usize; 2];
    for ((&p, &s), &y) in preds.iter().zip(sensitive).zip(truth) {
        let g = group_index(s)?;
        if y == 1 {
            positives[g] += 1;
            if p == 1 {
                hits[g] += 1;
            }
        }
    }
    for (g, &n) in positives.iter().enumerate() {
        if n == 0 {
            return Err(Error::UndefinedMetric(format!(
                "sensitive group {g} has no positive labels"
            )));
        }
    }
    let r0 = hits[0] as f64 / positives[0] as f64;
    let r1 = hits[1] as f64 / positives[1] as f64;
    Ok((r0 - r1).abs())
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Validation(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::UndefinedMetric("zero variance input".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Interval for a downstream correlation given an angle `alpha` between
/// communities and predictions and slack `delta` around orthogonality of
/// the sensitive attribute and communities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationBound {
    pub alpha: f64,
    pub delta: f64,
    pub lower: f64,
    pub upper: f64,
}

impl CorrelationBound {
    pub fn contains(&self, rho: f64, slack: f64) -> bool {
        rho >= self.lower - slack && rho <= self.upper + slack
    }
}

pub fn correlation_bound(alpha: f64, delta: f64) -> Result<CorrelationBound> {
    if !(alpha >= 0.0 && delta >= 0.0 && alpha + delta <= FRAC_PI_2 + 1e-15) {
        return Err(Error::Domain(format!(
            "need alpha, delta >= 0 and alpha + delta <= pi/2 (alpha={alpha}, delta={delta})"
        )));
    }
    // clamp keeps the interval exactly symmetric about zero
    let upper = (FRAC_PI_2 - delta - alpha).cos().clamp(0.0, 1.0);
    Ok(CorrelationBound {
        alpha,
        delta,
        lower: -upper,
        upper,
    })
}

/// Range of `ρ(X,Z)` implied by `ρ(X,Y) = cos a` and `ρ(Y,Z) = cos b`:
/// `[cos(a+b), cos(a−b)]`.
pub fn chained_correlation_interval(rho_xy: f64, rho_yz: f64) -> (f64, f64) {
    let a = rho_xy.clamp(-1.0, 1.0).acos();
    let b = rho_yz.clamp(-1.0, 1.0).acos();
    ((a + b).cos(), (a - b).cos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

    #[test]
    fn binary_examples() {
        let s = [0, 0, 1, 1];
        assert_eq!(delta_sp_binary(&[1, 1, 0, 0], &s).unwrap(), 1.0);
        assert_eq!(delta_sp_binary(&[1, 0, 1, 0], &s).unwrap(), 0.0);
        assert_eq!(delta_sp_binary(&[1, 1, 1, 0], &s).unwrap(), 0.5);
        assert!(matches!(
            delta_sp_binary(&[1, 0], &[0, 0]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn multiclass_examples() {
        let s = [0, 0, 1, 1];
        let labels = [1usize, 1, 1, 0];
        let preds: Vec<u8> = labels.iter().map(|&l| l as u8).collect();
        assert_eq!(
            delta_sp_multiclass(&labels, &s).unwrap(),
            delta_sp_binary(&preds, &s).unwrap()
        );
        assert_eq!(delta_sp_multiclass(&[0, 2, 2, 0], &s).unwrap(), 0.0);
        assert_eq!(delta_sp_multiclass(&[0, 0, 2, 2], &s).unwrap(), 1.0);
    }

    #[test]
    fn soft_examples() {
        let s = [0, 0, 1, 1];
        let c = array![[0.9, 0.1], [0.7, 0.3], [0.2, 0.8], [0.4, 0.6]];
        assert_abs_diff_eq!(delta_sp_soft(&c, &s).unwrap(), 0.5, epsilon = 1e-15);
        let same = array![[0.3, 0.7], [0.3, 0.7], [0.3, 0.7], [0.3, 0.7]];
        assert_eq!(delta_sp_soft(&same, &s).unwrap(), 0.0);
        let onehot = array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(
            delta_sp_soft(&onehot, &s).unwrap(),
            delta_sp_multiclass(&[0, 2, 1, 2], &s).unwrap()
        );
        let bad = array![[0.5, 0.1], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5]];
        assert!(matches!(delta_sp_soft(&bad, &s), Err(Error::Validation(_))));
    }

    #[test]
    fn eo_examples() {
        let s = [0, 0, 1, 1];
        let y = [1, 0, 1, 1];
        assert_eq!(delta_eo(&y, &s, &y).unwrap(), 0.0);
        assert_eq!(delta_eo(&[0, 0, 1, 1], &s, &[1, 1, 1, 1]).unwrap(), 1.0);
        assert_eq!(delta_eo(&[1, 0, 1, 1], &s, &[1, 1, 1, 1]).unwrap(), 0.5);
        assert!(matches!(
            delta_eo(&[1, 0, 1, 1], &s, &[0, 0, 1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let affine: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(pearson(&x, &affine).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pearson(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8, epsilon = 1e-15);
        assert!(matches!(
            pearson(&x, &[1.0; 4]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn bound_examples() {
        let b = correlation_bound(0.0, 0.0).unwrap();
        assert_abs_diff_eq!(b.lower, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.upper, 0.0, epsilon = 1e-15);
        let b = correlation_bound(FRAC_PI_6, 0.0).unwrap();
        assert_abs_diff_eq!(b.lower, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(b.upper, 0.5, epsilon = 1e-15);
        let b = correlation_bound(FRAC_PI_4, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(b.lower, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.upper, 1.0, epsilon = 1e-15);
        assert!(matches!(correlation_bound(1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(correlation_bound(-0.1, 0.0), Err(Error::Domain(_))));
    }
}
