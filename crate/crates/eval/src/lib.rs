//! Synthetic data, naive link-addition baselines and downstream evaluation.

pub mod baselines;
pub mod gcn;
pub mod louvain;
pub mod metrics;
pub mod report;
pub mod sbm;

pub use baselines::{baseline_linkpred_add, baseline_random_add};
pub use gcn::{train_gcn, GcnConfig, GcnOutput, Split};
pub use louvain::{louvain, modularity};
pub use report::{evaluate, format_key_values, format_table, EvalConfig, EvalReport, SeedScores, DEFAULT_SEEDS};
pub use sbm::{generate_sbm, SbmSpec};
