//! Dense finite-difference reference for the structure gradient.
//!
//! Everything here is recomputed from a dense, possibly non-binary
//! adjacency matrix and shares no code with the sparse forward and reverse
//! passes, so it can serve as an independent check.

use ndarray::Array2;

use crate::community::{check_params, CommunityInit};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Pseudo-task loss for an arbitrary dense symmetric adjacency matrix.
pub fn dense_loss(
    adjacency: &Array2<f64>,
    init: &Array2<f64>,
    sensitive: &[u8],
    alpha: f64,
    steps: usize,
) -> Result<f64> {
    let n = adjacency.nrows();
    let mut a_hat = adjacency.clone();
    for i in 0..n {
        a_hat[[i, i]] += 1.0;
    }
    let degree: Vec<f64> = a_hat.rows().into_iter().map(|r| r.sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a_hat[[i, j]] /= (degree[i] * degree[j]).sqrt();
        }
    }

    // explicit series form rather than the recurrence
    let mut power = init.clone();
    let mut z = init * alpha;
    for i in 1..steps {
        power = a_hat.dot(&power);
        z.scaled_add(alpha * (1.0 - alpha).powi(i as i32), &power);
    }
    power = a_hat.dot(&power);
    z.scaled_add((1.0 - alpha).powi(steps as i32), &power);

    let c = z.ncols();
    let mut sums = [vec![0.0; c], vec![0.0; c]];
    let mut sizes = [0.0f64; 2];
    for (row, &s) in z.rows().into_iter().zip(sensitive) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let g = s as usize;
        sizes[g] += 1.0;
        for (acc, e) in sums[g].iter_mut().zip(&exps) {
            *acc += e / total;
        }
    }
    if sizes[0] == 0.0 || sizes[1] == 0.0 {
        return Err(Error::UndefinedMetric("a sensitive group is empty".into()));
    }
    Ok(0.5
        * sums[0]
            .iter()
            .zip(&sums[1])
            .map(|(a, b)| (a / sizes[0] - b / sizes[1]).abs())
            .sum::<f64>())
}

/// Symmetric central difference `(L(A + hE) − L(A − hE)) / 4h` where `E`
/// has ones at `(i, j)` and `(j, i)`. Works for edges and non-edges alike.
#[allow(clippy::too_many_arguments)]
pub fn finite_difference_oracle(
    g: &Graph,
    init: &CommunityInit,
    alpha: f64,
    steps: usize,
    i: usize,
    j: usize,
    h: f64,
) -> Result<f64> {
    check_params(alpha, steps)?;
    let n = g.num_nodes();
    for node in [i, j] {
        if node >= n {
            return Err(Error::IndexOutOfRange { node, num_nodes: n });
        }
    }
    if i == j {
        return Err(Error::Domain("finite differences need an off-diagonal pair".into()));
    }
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step {h} must be positive")));
    }
    let base = g.dense_adjacency();
    let shifted = |delta: f64| {
        let mut a = base.clone();
        a[[i, j]] += delta;
        a[[j, i]] += delta;
        dense_loss(&a, &init.onehot, g.sensitive(), alpha, steps)
    };
    Ok((shifted(h)? - shifted(-h)?) / (4.0 * h))
}
