//! Reverse-mode gradient of the pseudo-task fairness loss with respect to
//! the adjacency matrix.
//!
//! The loss is differentiated through the row softmax, the unrolled
//! propagation recurrence and the degree normalisation of `A + I`. The
//! initial community labels are treated as constants.
//!
//! With `G_t = ∂L/∂Z_t` the derivative with respect to the normalised
//! matrix is `∂L/∂Â = (1−α) Σ_t G_t Z_{t−1}ᵀ = U Vᵀ`, where
//! `U = (1−α)[G_1 … G_K]` and `V = [Z_0 … Z_{K−1}]` are `N × KC`. Entries
//! are never materialised as a dense `N × N` matrix; each pair is a dot
//! product of two factor rows plus per-node degree terms.

mod oracle;

use std::hash::Hasher;
use std::io::Write;

use ndarray::Array2;

pub use oracle::{dense_loss, finite_difference_oracle};

use crate::community::{check_params, propagation_states, softmax_rows, CommunityInit};
use crate::error::{Error, Result};
use crate::fingerprint::Fnv64;
use crate::graph::{ordered, Graph};
use crate::metrics::group_means;

/// How the degree normalisation enters the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeMode {
    /// Differentiate `D^{-1/2}(A+I)D^{-1/2}` including the degrees.
    #[default]
    Exact,
    /// Treat `D` as constant. Cheaper, not the true gradient.
    Frozen,
}

/// `∂ΔSP/∂C` for the soft statistical parity, with subgradient 0 where a
/// class has equal group means.
pub fn grad_loss_wrt_assignment(memberships: &Array2<f64>, sensitive: &[u8]) -> Result<Array2<f64>> {
    Ok(soft_parity_with_grad(memberships, sensitive)?.1)
}

/// Soft statistical parity and its gradient in one pass.
pub fn soft_parity_with_grad(memberships: &Array2<f64>, sensitive: &[u8]) -> Result<(f64, Array2<f64>)> {
    let ([m0, m1], sizes) = group_means(memberships, sensitive)?;
    let mut loss = 0.0;
    let mut sign = vec![0.0; m0.len()];
    for (k, (a, b)) in m0.iter().zip(&m1).enumerate() {
        let d = a - b;
        loss += d.abs();
        sign[k] = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
    }
    let w = [0.5 / sizes[0] as f64, -0.5 / sizes[1] as f64];
    let mut grad = Array2::zeros(memberships.raw_dim());
    for (mut row, &s) in grad.rows_mut().into_iter().zip(sensitive) {
        let scale = w[s as usize];
        for (g, &sg) in row.iter_mut().zip(&sign) {
            *g = scale * sg;
        }
    }
    Ok((0.5 * loss, grad))
}

/// Structure gradient evaluated at one graph.
#[derive(Debug, Clone)]
pub struct MetaGradient {
    loss: f64,
    left: Array2<f64>,
    right: Array2<f64>,
    inv_sqrt_degree: Vec<f64>,
    degree_term: Vec<f64>,
    snapshot: u64,
}

fn snapshot_hash(g: &Graph, init: &CommunityInit, alpha: f64, steps: usize) -> u64 {
    let mut h = Fnv64::default();
    h.write_u64(g.num_nodes() as u64);
    for (i, j) in g.edges() {
        h.write_u64(i as u64);
        h.write_u64(j as u64);
    }
    for &v in init.onehot.iter() {
        h.write_f64(v);
    }
    h.write_f64(alpha);
    h.write_u64(steps as u64);
    h.finish()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl MetaGradient {
    /// Fairness loss at the evaluation point.
    pub fn loss(&self) -> f64 {
        self.loss
    }

    pub fn num_nodes(&self) -> usize {
        self.inv_sqrt_degree.len()
    }

    /// Hash of the adjacency, initial labels and propagation parameters.
    pub fn snapshot(&self) -> u64 {
        self.snapshot
    }

    /// `∂L/∂Â_ij` for the unsymmetrised normalised matrix.
    fn raw(&self, i: usize, j: usize) -> f64 {
        dot(
            self.left.row(i).as_slice().unwrap(),
            self.right.row(j).as_slice().unwrap(),
        )
    }

    /// Symmetrised gradient `(∂L/∂A_ij + ∂L/∂A_ji) / 2`; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (i, j) = ordered(i, j);
        let cross = self.raw(i, j) + self.raw(j, i);
        0.5 * (cross * (self.inv_sqrt_degree[i] * self.inv_sqrt_degree[j])
            + (self.degree_term[i] + self.degree_term[j]))
    }

    /// Gradient entries of every current non-edge, lexicographic order.
    pub fn candidate_gradients<'a>(&'a self, g: &'a Graph) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        g.candidate_edges().map(move |(i, j)| (i, j, self.get(i, j)))
    }

    /// Dense symmetric matrix of all entries. Small graphs only.
    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        Array2::from_shape_fn((n, n), |(i, j)| self.get(i, j))
    }

    /// The `k` most negative candidate entries as `i<TAB>j<TAB>grad` lines.
    pub fn write_top_negative<W: Write>(&self, g: &Graph, k: usize, mut out: W) -> std::io::Result<()> {
        let mut all: Vec<(usize, usize, f64)> =
            self.candidate_gradients(g).filter(|e| e.2 < 0.0).collect();
        all.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
        for (i, j, v) in all.into_iter().take(k) {
            writeln!(out, "{i}\t{j}\t{v:e}")?;
        }
        Ok(())
    }
}

/// Exact structure gradient of the soft statistical parity of the
/// propagated communities.
pub fn meta_gradient(g: &Graph, init: &CommunityInit, alpha: f64, steps: usize) -> Result<MetaGradient> {
    meta_gradient_with(g, init, alpha, steps, DegreeMode::Exact, soft_parity_with_grad)
}

/// Structure gradient for an arbitrary differentiable loss on the soft
/// memberships. `loss` returns the value and `∂L/∂C`.
pub fn meta_gradient_with<F>(
    g: &Graph,
    init: &CommunityInit,
    alpha: f64,
    steps: usize,
    mode: DegreeMode,
    loss: F,
) -> Result<MetaGradient>
where
    F: Fn(&Array2<f64>, &[u8]) -> Result<(f64, Array2<f64>)>,
{
    check_params(alpha, steps)?;
    let n = g.num_nodes();
    if init.num_nodes() != n {
        return Err(Error::Validation(format!(
            "initial labels cover {} nodes, graph has {n}",
            init.num_nodes()
        )));
    }
    let c = init.num_communities;
    let norm = g.normalized_adjacency();
    let states = propagation_states(&init.onehot, &norm, alpha, steps);
    let soft = softmax_rows(&states[steps]);
    let (value, upstream) = loss(&soft, g.sensitive())?;

    // softmax backward: G = C ⊙ (dC − <C, dC>)
    let mut grad = upstream;
    for (mut grow, crow) in grad.rows_mut().into_iter().zip(soft.rows()) {
        let inner: f64 = grow.iter().zip(crow).map(|(a, b)| a * b).sum();
        for (gv, &cv) in grow.iter_mut().zip(crow) {
            *gv = cv * (*gv - inner);
        }
    }

    let width = steps * c;
    let mut left = Array2::zeros((n, width));
    let mut right = Array2::zeros((n, width));
    for t in (1..=steps).rev() {
        let cols = (t - 1) * c..t * c;
        left.slice_mut(ndarray::s![.., cols.clone()])
            .assign(&(&grad * (1.0 - alpha)));
        right.slice_mut(ndarray::s![.., cols]).assign(&states[t - 1]);
        if t > 1 {
            grad = norm.mul(&grad);
            grad *= 1.0 - alpha;
        }
    }

    let inv_sqrt_degree: Vec<f64> = norm.degree().iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut mg = MetaGradient {
        loss: value,
        left,
        right,
        inv_sqrt_degree,
        degree_term: vec![0.0; n],
        snapshot: snapshot_hash(g, init, alpha, steps),
    };

    if mode == DegreeMode::Exact {
        // ∂L/∂d_i = −(1/2d_i) Σ_v Â_iv (∂L/∂Â_iv + ∂L/∂Â_vi)
        for i in 0..n {
            let (cols, vals) = norm.row(i);
            let mut acc = 0.0;
            for (&v, &a) in cols.iter().zip(vals) {
                acc += a * (mg.raw(i, v) + mg.raw(v, i));
            }
            mg.degree_term[i] = -0.5 * acc / norm.degree()[i];
        }
    }

    if !value.is_finite() {
        return Err(Error::Numerical(format!("non-finite loss {value}")));
    }
    for i in 0..n {
        let finite = mg.degree_term[i].is_finite()
            && mg.left.row(i).iter().all(|v| v.is_finite())
            && mg.right.row(i).iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Numerical(format!(
                "non-finite structure gradient involving node {i}"
            )));
        }
    }
    Ok(mg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::delta_sp_soft;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stochastic(n: usize, c: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = Array2::from_shape_fn((n, c), |_| rng.random_range(0.1..1.0));
        let sums = raw.sum_axis(ndarray::Axis(1));
        let mut out = raw;
        for (mut row, s) in out.rows_mut().into_iter().zip(sums) {
            row /= s;
        }
        out
    }

    #[test]
    fn equal_rows_give_zero_upstream_gradient() {
        let c = array![[0.2, 0.8], [0.2, 0.8], [0.2, 0.8]];
        let g = grad_loss_wrt_assignment(&c, &[0, 1, 1]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_class_gives_zero() {
        let c = array![[1.0], [1.0]];
        let g = grad_loss_wrt_assignment(&c, &[0, 1]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upstream_gradient_matches_central_differences() {
        let s = [0, 1, 0, 1, 1, 0];
        let c = random_stochastic(6, 3, 11);
        let g = grad_loss_wrt_assignment(&c, &s).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for k in 0..3 {
                let mut plus = c.clone();
                plus[[i, k]] += h;
                let mut minus = c.clone();
                minus[[i, k]] -= h;
                let fd = (crate::metrics::delta_sp_soft_unchecked(&plus, &s).unwrap()
                    - crate::metrics::delta_sp_soft_unchecked(&minus, &s).unwrap())
                    / (2.0 * h);
                assert!((fd - g[[i, k]]).abs() < 1e-6, "({i},{k}) {fd} vs {}", g[[i, k]]);
            }
        }
        assert!(grad_loss_wrt_assignment(&c, &[0; 6]).is_err());
    }

    #[test]
    fn combined_value_matches_metric() {
        let s = [0, 1, 0, 1, 1, 0];
        let c = random_stochastic(6, 3, 5);
        let (v, _) = soft_parity_with_grad(&c, &s).unwrap();
        assert_eq!(v, delta_sp_soft(&c, &s).unwrap());
    }

    #[test]
    fn dot_handles_tails() {
        let a: Vec<f64> = (0..7).map(|v| v as f64).collect();
        let b = vec![1.0; 7];
        assert_eq!(dot(&a, &b), 21.0);
    }
}
