//! Seeded stochastic block model with node features, a sensitive attribute
//! and binary labels.

use fairlink::rng::{component_rng, Stream};
use fairlink::{Error, Graph, Result};
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbmSpec {
    pub num_nodes: usize,
    pub num_blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Probability that a node's sensitive attribute equals the majority
    /// attribute of its block (`block % 2`).
    pub alignment: f64,
    pub feature_dim: usize,
    /// Shift of the block mean along the block's own feature coordinates.
    pub feature_signal: f64,
    /// Probability that a node's label is flipped away from `block % 2`.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        Self {
            num_nodes: 200,
            num_blocks: 2,
            p_in: 0.1,
            p_out: 0.005,
            alignment: 0.95,
            feature_dim: 16,
            feature_signal: 0.5,
            label_noise: 0.1,
            seed: 0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("alignment", self.alignment),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("{name} = {p} is not a probability")));
            }
        }
        if self.num_blocks < 2 || self.num_nodes < self.num_blocks {
            return Err(Error::Domain(format!(
                "need N >= blocks >= 2, got N = {} and {} blocks",
                self.num_nodes, self.num_blocks
            )));
        }
        if !self.feature_signal.is_finite() {
            return Err(Error::Domain("feature signal must be finite".into()));
        }
        Ok(())
    }

    pub fn block_of(&self, node: usize) -> usize {
        node % self.num_blocks
    }
}

/// Draw order on the generator stream: sensitive attributes, labels,
/// features (row-major), then edges in lexicographic pair order.
pub fn generate_sbm(spec: &SbmSpec) -> Result<Graph> {
    spec.validate()?;
    let n = spec.num_nodes;
    let mut rng = component_rng(spec.seed, Stream::Generator);

    let sensitive: Vec<u8> = (0..n)
        .map(|v| {
            let majority = (spec.block_of(v) % 2) as u8;
            if rng.random::<f64>() < spec.alignment {
                majority
            } else {
                1 - majority
            }
        })
        .collect();
    let labels: Vec<Option<u32>> = (0..n)
        .map(|v| {
            let clean = (spec.block_of(v) % 2) as u32;
            Some(if rng.random::<f64>() < spec.label_noise { 1 - clean } else { clean })
        })
        .collect();
    let features = Array2::from_shape_fn((n, spec.feature_dim), |(v, m)| {
        let noise: f64 = rng.sample(StandardNormal);
        let shift = if m % spec.num_blocks == spec.block_of(v) {
            spec.feature_signal
        } else {
            0.0
        };
        shift + noise
    });

    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if spec.block_of(i) == spec.block_of(j) { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges, features, sensitive)?.with_labels(labels)
}
