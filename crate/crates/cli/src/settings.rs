//! Guide hyperparameters: defaults, then an optional TOML file, then flags.

use std::path::Path;

use clap::Args;
use fairlink::community::AutoencoderConfig;
use fairlink::meta_gradient::DegreeMode;
use fairlink::GuideConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Fully resolved settings, as recorded in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuideSettings {
    pub budget: usize,
    pub batch: usize,
    pub alpha: f64,
    pub k_steps: usize,
    pub communities: usize,
    pub beta: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub ae_epochs: usize,
    pub ae_learning_rate: f64,
    pub ae_hidden: usize,
    pub ae_latent: usize,
    pub kmeans_iters: usize,
    pub frozen_degrees: bool,
}

impl Default for GuideSettings {
    fn default() -> Self {
        let g = GuideConfig::default();
        Self {
            budget: g.budget,
            batch: g.batch_size,
            alpha: g.alpha,
            k_steps: g.steps,
            communities: g.num_communities,
            beta: g.beta,
            tau: g.tau,
            epsilon: g.epsilon,
            seed: g.seed,
            ae_epochs: g.autoencoder.epochs,
            ae_learning_rate: g.autoencoder.learning_rate,
            ae_hidden: g.autoencoder.hidden,
            ae_latent: g.autoencoder.latent,
            kmeans_iters: g.kmeans_iters,
            frozen_degrees: g.degree_mode == DegreeMode::Frozen,
        }
    }
}

/// Optional overrides. Used both for the TOML file and for the flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct GuideOverrides {
    /// Maximum number of links to add.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Links added per round.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Restart probability of the propagation.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Propagation depth.
    #[arg(long = "k-steps")]
    pub k_steps: Option<usize>,
    /// Number of initial communities.
    #[arg(long)]
    pub communities: Option<usize>,
    /// Cross-group boost.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Gumbel temperature.
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "ae-epochs")]
    pub ae_epochs: Option<usize>,
    #[arg(long = "ae-learning-rate")]
    pub ae_learning_rate: Option<f64>,
    #[arg(long = "ae-hidden")]
    pub ae_hidden: Option<usize>,
    #[arg(long = "ae-latent")]
    pub ae_latent: Option<usize>,
    #[arg(long = "kmeans-iters")]
    pub kmeans_iters: Option<usize>,
    /// Treat node degrees as constants when differentiating.
    #[arg(long = "frozen-degrees")]
    pub frozen_degrees: Option<bool>,
}

impl GuideOverrides {
    pub fn from_toml_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn apply(&self, s: &mut GuideSettings) {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { s.$f = v; })* };
        }
        take!(budget, batch, alpha, k_steps, communities, beta, tau, epsilon, seed, ae_epochs,
              ae_learning_rate, ae_hidden, ae_latent, kmeans_iters, frozen_degrees);
    }
}

impl GuideSettings {
    pub fn resolve(config: Option<&Path>, flags: &GuideOverrides) -> CliResult<Self> {
        let mut s = Self::default();
        if let Some(path) = config {
            GuideOverrides::from_toml_file(path)?.apply(&mut s);
        }
        flags.apply(&mut s);
        let cfg = s.to_config();
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(s)
    }

    pub fn to_config(&self) -> GuideConfig {
        GuideConfig {
            budget: self.budget,
            batch_size: self.batch,
            beta: self.beta,
            tau: self.tau,
            epsilon: self.epsilon,
            alpha: self.alpha,
            steps: self.k_steps,
            num_communities: self.communities,
            autoencoder: AutoencoderConfig {
                hidden: self.ae_hidden,
                latent: self.ae_latent,
                epochs: self.ae_epochs,
                learning_rate: self.ae_learning_rate,
                seed: self.seed,
            },
            kmeans_iters: self.kmeans_iters,
            degree_mode: if self.frozen_degrees { DegreeMode::Frozen } else { DegreeMode::Exact },
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_which_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "beta = 2.0\nbatch = 7\n").unwrap();
        let flags = GuideOverrides { beta: Some(9.0), ..Default::default() };
        let s = GuideSettings::resolve(Some(&path), &flags).unwrap();
        assert_eq!((s.beta, s.batch, s.alpha), (9.0, 7, 0.1));
    }

    #[test]
    fn unknown_config_keys_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "betta = 2.0\n").unwrap();
        assert!(matches!(GuideSettings::resolve(Some(&path), &GuideOverrides::default()), Err(CliError::Usage(_))));
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let flags = GuideOverrides { alpha: Some(1.5), ..Default::default() };
        assert!(matches!(GuideSettings::resolve(None, &flags), Err(CliError::Usage(_))));
    }

    #[test]
    fn defaults_round_trip_through_the_library_config() {
        let s = GuideSettings::default();
        assert_eq!(s.to_config(), GuideConfig::default());
    }
}
