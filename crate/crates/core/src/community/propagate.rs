//! Restart-based propagation of initial community labels.
//!
//! `Z_0 = C_init`, `Z_t = (1−α) Â Z_{t−1} + α C_init` for `t = 1..K`, which
//! unrolls to `(1−α)^K Â^K C_init + α Σ_{i<K} (1−α)^i Â^i C_init`. The soft
//! assignment is the row-wise softmax of `Z_K`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::NormAdj;

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    pub soft: Array2<f64>,
    pub alpha: f64,
    pub steps: usize,
}

pub(crate) fn check_params(alpha: f64, steps: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("restart probability {alpha} outside [0, 1]")));
    }
    if steps == 0 {
        return Err(Error::Domain("propagation needs at least one step".into()));
    }
    Ok(())
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut out = z.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// All intermediate pre-activations `Z_0 ..= Z_K`.
pub(crate) fn propagation_states(
    init: &Array2<f64>,
    norm: &NormAdj,
    alpha: f64,
    steps: usize,
) -> Vec<Array2<f64>> {
    let mut states = Vec::with_capacity(steps + 1);
    states.push(init.clone());
    for _ in 0..steps {
        let mut next = norm.mul(states.last().unwrap());
        next *= 1.0 - alpha;
        next.scaled_add(alpha, init);
        states.push(next);
    }
    states
}

pub fn propagate(
    init: &Array2<f64>,
    norm: &NormAdj,
    alpha: f64,
    steps: usize,
) -> Result<CommunityAssignment> {
    check_params(alpha, steps)?;
    if init.nrows() != norm.num_nodes() {
        return Err(Error::Validation(format!(
            "initial labels have {} rows, graph has {} nodes",
            init.nrows(),
            norm.num_nodes()
        )));
    }
    let states = propagation_states(init, norm, alpha, steps);
    Ok(CommunityAssignment {
        soft: softmax_rows(states.last().unwrap()),
        alpha,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use ndarray::array;

    fn onehot() -> Array2<f64> {
        array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]
    }

    #[test]
    fn full_restart_is_softmax_of_init() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = propagate(&onehot(), &g.normalized_adjacency(), 1.0, 5).unwrap();
        assert_eq!(c.soft, softmax_rows(&onehot()));
    }

    #[test]
    fn identity_adjacency_telescopes() {
        let g = Graph::from_edges(3, &[]).unwrap();
        for k in [1, 3, 10] {
            let c = propagate(&onehot(), &g.normalized_adjacency(), 0.3, k).unwrap();
            let expected = softmax_rows(&onehot());
            for (a, b) in c.soft.iter().zip(expected.iter()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_hop_without_restart() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let norm = g.normalized_adjacency();
        let c = propagate(&onehot(), &norm, 0.0, 1).unwrap();
        assert_eq!(c.soft, softmax_rows(&norm.to_dense().dot(&onehot())));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let z = array![[1000.0, 999.0], [-5.0, 3.0]];
        let s = softmax_rows(&z);
        for row in s.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_validation() {
        let g = Graph::from_edges(3, &[]).unwrap();
        let norm = g.normalized_adjacency();
        assert!(propagate(&onehot(), &norm, 1.5, 1).is_err());
        assert!(propagate(&onehot(), &norm, 0.5, 0).is_err());
    }
}
