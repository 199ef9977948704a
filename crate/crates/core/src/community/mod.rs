//! Differentiable pseudo community detection.
//!
//! Initial communities come from k-means over auto-encoder embeddings of the
//! node features; structure enters only through the propagation step, so
//! the initial labels do not depend on the adjacency matrix.

mod autoencoder;
mod cache;
mod kmeans;
mod propagate;

pub use autoencoder::{standardize, train_autoencoder, AutoencoderConfig, AutoencoderModel};
pub use cache::{init_cache_key, load_init_cache, save_init_cache, CACHE_MAGIC, CACHE_VERSION};
pub use kmeans::{inertia, kmeans, CommunityInit};
pub use propagate::{propagate, softmax_rows, CommunityAssignment};

pub(crate) use propagate::{check_params, propagation_states};

use crate::error::Result;
use crate::graph::Graph;
use crate::metrics::delta_sp_soft_unchecked;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitConfig {
    pub autoencoder: AutoencoderConfig,
    pub num_communities: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            autoencoder: AutoencoderConfig::default(),
            num_communities: 10,
            kmeans_iters: 100,
            seed: 0,
        }
    }
}

/// Auto-encoder embedding followed by k-means.
pub fn initialize_communities(g: &Graph, config: &InitConfig) -> Result<CommunityInit> {
    let ae = AutoencoderConfig {
        seed: config.seed,
        ..config.autoencoder
    };
    let model = train_autoencoder(g.features(), &ae)?;
    log::debug!(
        "auto-encoder loss {:.4} -> {:.4}",
        model.loss_trace.first().copied().unwrap_or(f64::NAN),
        model.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    let latent = model.encode(g.features());
    kmeans(&latent, config.num_communities, config.seed, config.kmeans_iters)
}

/// Soft statistical parity of the propagated communities on `g`.
pub fn pseudo_task_loss(g: &Graph, init: &CommunityInit, alpha: f64, steps: usize) -> Result<f64> {
    let c = propagate(&init.onehot, &g.normalized_adjacency(), alpha, steps)?;
    delta_sp_soft_unchecked(&c.soft, g.sensitive())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::delta_sp_soft;
    use ndarray::Array2;

    #[test]
    fn aligned_cliques_hit_one_hot_bound() {
        // two 4-cliques, community and sensitive group both equal to the clique
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((base + i, base + j));
                }
            }
        }
        let s: Vec<u8> = (0..8).map(|i| (i / 4) as u8).collect();
        let g = Graph::from_edges(8, &edges).unwrap().with_sensitive(s).unwrap();
        let labels: Vec<usize> = (0..8).map(|i| i / 4).collect();
        let init = CommunityInit::from_labels(labels, Array2::zeros((2, 1)), 2).unwrap();
        let loss = pseudo_task_loss(&g, &init, 0.1, 10).unwrap();
        let e = std::f64::consts::E;
        assert!((loss - (e - 1.0) / (e + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn loss_matches_soft_metric() {
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)])
            .unwrap()
            .with_sensitive(vec![0, 1, 0, 1])
            .unwrap();
        let init = CommunityInit::from_labels(vec![0, 0, 1, 1], Array2::zeros((2, 1)), 2).unwrap();
        let c = propagate(&init.onehot, &g.normalized_adjacency(), 0.2, 3).unwrap();
        assert_eq!(
            pseudo_task_loss(&g, &init, 0.2, 3).unwrap(),
            delta_sp_soft(&c.soft, g.sensitive()).unwrap()
        );
    }
}
