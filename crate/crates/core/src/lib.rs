//! Fairness-guided link addition for attributed graphs.
//!
//! Given an undirected graph with node features and a binary sensitive
//! attribute, `fairlink` proposes a budgeted set of new links that lowers
//! the statistical-parity gap of a differentiable community detection
//! task, as a proxy for the unknown downstream models trained on the graph.
//!
//! The pipeline is:
//!
//! 1. [`community::initialize_communities`]: auto-encoder embedding of the
//!    features followed by k-means, giving fixed one-hot initial labels;
//! 2. [`community::propagate`]: restart propagation of those labels over
//!    the normalised adjacency and a row softmax;
//! 3. [`meta_gradient::meta_gradient`]: exact gradient of the soft parity
//!    gap with respect to every adjacency entry;
//! 4. [`sampler::guide`]: cross-group boosted scores, Gumbel perturbation
//!    and top-k selection, repeated in batches until the budget is spent.

pub mod community;
pub mod error;
pub mod fingerprint;
pub mod graph;
pub mod io;
pub mod meta_gradient;
pub mod metrics;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::{EdgeBatch, Graph, NormAdj};
pub use meta_gradient::{meta_gradient, MetaGradient};
pub use sampler::{guide, GuideConfig, GuideResult, GuideStatus};
