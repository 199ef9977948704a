//! MLP auto-encoder used to embed node features before clustering.
//!
//! Shape `M → H → L → H → M` with tanh on every hidden layer (including the
//! latent code) and a linear output. Trained full-batch on mean squared
//! reconstruction error with RMSProp (no momentum term).

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{component_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoencoderConfig {
    pub hidden: usize,
    pub latent: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            latent: 64,
            epochs: 1000,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

const RMS_DECAY: f64 = 0.99;
const RMS_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Dense {
    weight: Array2<f64>,
    bias: Array1<f64>,
    weight_sq: Array2<f64>,
    bias_sq: Array1<f64>,
}

impl Dense {
    fn new<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
        Self {
            weight,
            bias: Array1::zeros(fan_out),
            weight_sq: Array2::zeros((fan_in, fan_out)),
            bias_sq: Array1::zeros(fan_out),
        }
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    /// Applies an RMSProp step given the upstream gradient and layer input;
    /// returns the gradient w.r.t. the input.
    fn backward(&mut self, input: &Array2<f64>, grad_out: &Array2<f64>, lr: f64) -> Array2<f64> {
        let grad_in = grad_out.dot(&self.weight.t());
        let gw = input.t().dot(grad_out);
        let gb = grad_out.sum_axis(Axis(0));
        rms_step(&mut self.weight, &mut self.weight_sq, &gw, lr);
        rms_step(&mut self.bias, &mut self.bias_sq, &gb, lr);
        grad_in
    }
}

fn rms_step<D: ndarray::Dimension>(
    param: &mut ndarray::Array<f64, D>,
    sq: &mut ndarray::Array<f64, D>,
    grad: &ndarray::Array<f64, D>,
    lr: f64,
) {
    ndarray::Zip::from(param)
        .and(sq)
        .and(grad)
        .for_each(|p, s, &g| {
            *s = RMS_DECAY * *s + (1.0 - RMS_DECAY) * g * g;
            *p -= lr * g / (s.sqrt() + RMS_EPS);
        });
}

#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    layers: [Dense; 4],
    /// Per-column mean and scale used to standardise inputs.
    column_mean: Array1<f64>,
    column_scale: Array1<f64>,
    /// Reconstruction loss before each epoch, plus the final loss.
    pub loss_trace: Vec<f64>,
}

/// Zero-mean, unit-variance columns; constant columns map to zero.
pub fn standardize(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let n = x.nrows().max(1) as f64;
    let mean = x.sum_axis(Axis(0)) / n;
    let centered = x - &mean;
    let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
    let scale = var.mapv(|v| if v > 0.0 { v.sqrt() } else { 1.0 });
    (centered / &scale, mean, scale)
}

impl AutoencoderModel {
    pub fn hidden(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn latent(&self) -> usize {
        self.layers[1].weight.ncols()
    }

    fn standardized(&self, x: &Array2<f64>) -> Array2<f64> {
        (x - &self.column_mean) / &self.column_scale
    }

    /// Latent codes for raw (unstandardised) features.
    pub fn encode(&self, x: &Array2<f64>) -> Array2<f64> {
        let xs = self.standardized(x);
        let h = self.layers[0].forward(&xs).mapv(f64::tanh);
        self.layers[1].forward(&h).mapv(f64::tanh)
    }

    /// Mean squared reconstruction error in standardised units.
    pub fn reconstruction_loss(&self, x: &Array2<f64>) -> f64 {
        let xs = self.standardized(x);
        let z = self.encode(x);
        let h = self.layers[2].forward(&z).mapv(f64::tanh);
        let out = self.layers[3].forward(&h);
        (out - &xs).mapv(|v| v * v).mean().unwrap_or(0.0)
    }

    pub fn weights_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// Flattened parameters, for reproducibility checks.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}

pub fn train_autoencoder(x: &Array2<f64>, config: &AutoencoderConfig) -> Result<AutoencoderModel> {
    let m = x.ncols();
    if m == 0 {
        return Err(Error::Domain("auto-encoder needs at least one feature column".into()));
    }
    if config.hidden == 0 || config.latent == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Domain(format!("invalid auto-encoder config {config:?}")));
    }
    let (xs, column_mean, column_scale) = standardize(x);
    let mut rng = component_rng(config.seed, Stream::Autoencoder);
    let mut layers = [
        Dense::new(m, config.hidden, &mut rng),
        Dense::new(config.hidden, config.latent, &mut rng),
        Dense::new(config.latent, config.hidden, &mut rng),
        Dense::new(config.hidden, m, &mut rng),
    ];
    let count = (xs.nrows() * m).max(1) as f64;
    let mut loss_trace = Vec::with_capacity(config.epochs + 1);

    for epoch in 0..=config.epochs {
        let a1 = layers[0].forward(&xs).mapv(f64::tanh);
        let a2 = layers[1].forward(&a1).mapv(f64::tanh);
        let a3 = layers[2].forward(&a2).mapv(f64::tanh);
        let out = layers[3].forward(&a3);
        let diff = out - &xs;
        let loss = diff.mapv(|v| v * v).sum() / count;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "auto-encoder loss diverged at epoch {epoch}"
            )));
        }
        loss_trace.push(loss);
        if epoch == config.epochs {
            break;
        }

        let lr = config.learning_rate;
        let g_out = diff * (2.0 / count);
        let g3 = layers[3].backward(&a3, &g_out, lr) * a3.mapv(|v| 1.0 - v * v);
        let g2 = layers[2].backward(&a2, &g3, lr) * a2.mapv(|v| 1.0 - v * v);
        let g1 = layers[1].backward(&a1, &g2, lr) * a1.mapv(|v| 1.0 - v * v);
        layers[0].backward(&xs, &g1, lr);
    }

    Ok(AutoencoderModel {
        layers,
        column_mean,
        column_scale,
        loss_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(epochs: usize) -> AutoencoderConfig {
        AutoencoderConfig {
            hidden: 16,
            latent: 4,
            epochs,
            learning_rate: 1e-2,
            seed: 3,
        }
    }

    #[test]
    fn identical_rows_give_identical_codes() {
        let x = Array2::from_shape_fn((6, 3), |(_, j)| j as f64 + 0.5);
        let model = train_autoencoder(&x, &config(20)).unwrap();
        let z = model.encode(&x);
        for row in z.rows() {
            for (a, b) in row.iter().zip(z.row(0)) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn training_reduces_loss() {
        let x = Array2::from_shape_fn((8, 8), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let model = train_autoencoder(
            &x,
            &AutoencoderConfig {
                latent: 8,
                ..config(200)
            },
        )
        .unwrap();
        assert!(model.loss_trace.last().unwrap() < &model.loss_trace[0]);
        assert!(model.weights_finite());
    }

    #[test]
    fn moving_average_of_loss_is_non_increasing() {
        let x = Array2::from_shape_fn((20, 5), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
        let cfg = AutoencoderConfig {
            learning_rate: 1e-3,
            ..config(400)
        };
        let model = train_autoencoder(&x, &cfg).unwrap();
        let window = 50;
        let avgs: Vec<f64> = model
            .loss_trace
            .chunks(window)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        for w in avgs.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{avgs:?}");
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let x = Array2::from_shape_fn((10, 4), |(i, j)| (i as f64).sin() + j as f64);
        let a = train_autoencoder(&x, &config(30)).unwrap();
        let b = train_autoencoder(&x, &config(30)).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn divergence_is_reported() {
        let x = Array2::from_shape_fn((4, 2), |(i, j)| (i + j) as f64);
        let bad = AutoencoderConfig {
            learning_rate: f64::INFINITY,
            ..config(5)
        };
        assert!(matches!(train_autoencoder(&x, &bad), Err(Error::Numerical(_))));
    }

    #[test]
    fn empty_feature_matrix_is_rejected() {
        let x = Array2::<f64>::zeros((4, 0));
        assert!(matches!(train_autoencoder(&x, &config(5)), Err(Error::Domain(_))));
    }
}
