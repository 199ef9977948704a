//! Naive link-addition baselines at equal budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use fairlink::community::standardize;
use fairlink::rng::{component_rng, Stream};
use fairlink::{EdgeBatch, Error, Graph, Result};
use ndarray::Array2;
use rand::seq::index;

fn check_budget(g: &Graph, n_links: usize) -> Result<usize> {
    let available = g.num_candidates();
    if n_links > available {
        return Err(Error::Constraint(format!(
            "budget {n_links} exceeds the {available} candidate pairs"
        )));
    }
    Ok(available)
}

/// Adds `n_links` candidate pairs drawn uniformly without replacement.
pub fn baseline_random_add(g: &Graph, n_links: usize, seed: u64) -> Result<Graph> {
    let available = check_budget(g, n_links)?;
    let mut rng = component_rng(seed, Stream::Baseline);
    let mut picks = index::sample(&mut rng, available, n_links).into_vec();
    picks.sort_unstable();
    let mut wanted = picks.into_iter().peekable();
    let mut pairs = Vec::with_capacity(n_links);
    for (pos, pair) in g.candidate_edges().enumerate() {
        match wanted.peek() {
            Some(&p) if p == pos => {
                pairs.push(pair);
                wanted.next();
            }
            Some(_) => {}
            None => break,
        }
    }
    g.add_edges(&EdgeBatch::new(0, pairs))
}

/// Two-hop propagated standardised features `Â²X̃`.
pub fn propagated_embeddings(g: &Graph) -> Array2<f64> {
    let norm = g.normalized_adjacency();
    let (x, _, _) = standardize(g.features());
    norm.mul(&norm.mul(&x))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    similarity: f64,
    pair: (usize, usize),
}

impl Eq for Ranked {}

impl Ord for Ranked {
    /// Higher similarity first, then the lexicographically smaller pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.similarity
            .total_cmp(&other.similarity)
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Candidates ranked by cosine similarity of their propagated embeddings,
/// best first. Zero embeddings have similarity 0 with everything.
pub fn rank_by_similarity(g: &Graph, k: usize) -> Vec<((usize, usize), f64)> {
    let emb = propagated_embeddings(g);
    let norms: Vec<f64> = emb.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (i, j) in g.candidate_edges() {
        let denom = norms[i] * norms[j];
        let similarity = if denom > 0.0 { emb.row(i).dot(&emb.row(j)) / denom } else { 0.0 };
        let item = std::cmp::Reverse(Ranked { similarity, pair: (i, j) });
        if heap.len() < k {
            heap.push(item);
        } else if let Some(top) = heap.peek() {
            if item < *top {
                heap.pop();
                heap.push(item);
            }
        }
    }
    let mut out: Vec<Ranked> = heap.into_iter().map(|r| r.0).collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out.into_iter().map(|r| (r.pair, r.similarity)).collect()
}

/// Connects the `n_links` most similar unconnected pairs.
pub fn baseline_linkpred_add(g: &Graph, n_links: usize) -> Result<Graph> {
    check_budget(g, n_links)?;
    if n_links == 0 {
        return Ok(g.clone());
    }
    let pairs = rank_by_similarity(g, n_links).into_iter().map(|(p, _)| p).collect();
    g.add_edges(&EdgeBatch::new(0, pairs))
}
