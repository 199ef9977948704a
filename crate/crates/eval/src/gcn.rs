//! Two-layer graph convolutional network for binary node classification.
//!
//! `logits = Â · relu(Â X̃ W₁ + b₁) · W₂ + b₂`, softmax cross-entropy on the
//! training nodes, Adam, and the parameters with the best validation F1
//! (the latest epoch among ties).

use fairlink::community::standardize;
use fairlink::rng::{component_rng, Stream};
use fairlink::{Error, Graph, Result};
use ndarray::{Array1, Array2, Axis, Dimension, Zip};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::metrics::f1_score;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcnConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        Self {
            hidden: 128,
            epochs: 1000,
            learning_rate: 1e-3,
            seed: 0,
        }
    }
}

/// Disjoint node index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Shuffles the labelled nodes and cuts them 50% / 25% / 25%.
    pub fn random(labels: &[Option<u32>], seed: u64) -> Self {
        let mut nodes: Vec<usize> = (0..labels.len()).filter(|&v| labels[v].is_some()).collect();
        nodes.shuffle(&mut component_rng(seed, Stream::Split));
        let n_train = nodes.len() / 2;
        let n_val = nodes.len() / 4;
        let test = nodes.split_off(n_train + n_val);
        let val = nodes.split_off(n_train);
        let mut split = Self { train: nodes, val, test };
        for part in [&mut split.train, &mut split.val, &mut split.test] {
            part.sort_unstable();
        }
        split
    }

    pub fn validate(&self, labels: &[Option<u32>]) -> Result<()> {
        let mut seen = vec![false; labels.len()];
        for &v in self.train.iter().chain(&self.val).chain(&self.test) {
            if v >= labels.len() {
                return Err(Error::IndexOutOfRange { node: v, num_nodes: labels.len() });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::Validation(format!("node {v} appears in two splits")));
            }
            match labels[v] {
                Some(0 | 1) => {}
                Some(l) => return Err(Error::Domain(format!("label {l} of node {v} is not binary"))),
                None => return Err(Error::Validation(format!("node {v} is in a split but unlabelled"))),
            }
        }
        if self.train.is_empty() || self.val.is_empty() || self.test.is_empty() {
            return Err(Error::Validation("every split needs at least one node".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GcnOutput {
    /// Predicted class for each test node, in `split.test` order.
    pub predictions: Vec<u8>,
    /// Probability of class 1 for each test node.
    pub probabilities: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_f1: f64,
}

#[derive(Debug, Clone)]
struct Param<D: Dimension> {
    value: ndarray::Array<f64, D>,
    m: ndarray::Array<f64, D>,
    v: ndarray::Array<f64, D>,
}

impl<D: Dimension> Param<D> {
    fn new(value: ndarray::Array<f64, D>) -> Self {
        let zeros = ndarray::Array::zeros(value.raw_dim());
        Self { m: zeros.clone(), v: zeros, value }
    }

    fn adam(&mut self, grad: &ndarray::Array<f64, D>, lr: f64, t: i32) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        let c1 = 1.0 - B1.powi(t);
        let c2 = 1.0 - B2.powi(t);
        Zip::from(&mut self.value)
            .and(&mut self.m)
            .and(&mut self.v)
            .and(grad)
            .for_each(|p, m, v, &g| {
                *m = B1 * *m + (1.0 - B1) * g;
                *v = B2 * *v + (1.0 - B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + EPS);
            });
    }
}

fn xavier<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

/// Row softmax over two logits, returning the class-1 probability per row.
fn class_one_probability(logits: &Array2<f64>) -> Array1<f64> {
    logits.map_axis(Axis(1), |r| 1.0 / (1.0 + (r[0] - r[1]).exp()))
}

pub fn train_gcn(g: &Graph, labels: &[Option<u32>], split: &Split, config: &GcnConfig) -> Result<GcnOutput> {
    if labels.len() != g.num_nodes() {
        return Err(Error::Validation(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.num_nodes()
        )));
    }
    split.validate(labels)?;
    if config.hidden == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Domain(format!("invalid GCN config {config:?}")));
    }
    let label = |v: usize| labels[v].unwrap_or(0) as u8;
    let norm = g.normalized_adjacency();
    let (x, _, _) = standardize(g.features());
    let ax = norm.mul(&x);

    let mut rng = component_rng(config.seed, Stream::Gcn);
    let mut w1 = Param::new(xavier(ax.ncols(), config.hidden, &mut rng));
    let mut b1 = Param::new(Array1::zeros(config.hidden));
    let mut w2 = Param::new(xavier(config.hidden, 2, &mut rng));
    let mut b2 = Param::new(Array1::zeros(2));

    let val_truth: Vec<u8> = split.val.iter().map(|&v| label(v)).collect();
    let scale = 1.0 / split.train.len() as f64;
    let mut best: Option<GcnOutput> = None;

    for epoch in 0..=config.epochs {
        let pre = ax.dot(&w1.value) + &b1.value;
        let hidden = pre.mapv(|v| v.max(0.0));
        let logits = norm.mul(&hidden.dot(&w2.value)) + &b2.value;
        let p1 = class_one_probability(&logits);

        let mut loss = 0.0;
        let mut d_logits = Array2::<f64>::zeros((g.num_nodes(), 2));
        for &v in &split.train {
            let y = label(v) as usize;
            let p = [1.0 - p1[v], p1[v]];
            loss -= p[y].max(f64::MIN_POSITIVE).ln() * scale;
            d_logits[[v, 0]] = (p[0] - (y == 0) as u8 as f64) * scale;
            d_logits[[v, 1]] = (p[1] - (y == 1) as u8 as f64) * scale;
        }
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("GCN loss diverged at epoch {epoch}")));
        }

        let val_pred: Vec<u8> = split.val.iter().map(|&v| (p1[v] > 0.5) as u8).collect();
        let val_f1 = f1_score(&val_pred, &val_truth)?;
        if best.as_ref().is_none_or(|b| val_f1 >= b.best_val_f1) {
            best = Some(GcnOutput {
                predictions: split.test.iter().map(|&v| (p1[v] > 0.5) as u8).collect(),
                probabilities: split.test.iter().map(|&v| p1[v]).collect(),
                best_epoch: epoch,
                best_val_f1: val_f1,
            });
        }
        if epoch == config.epochs {
            break;
        }

        let t = epoch as i32 + 1;
        let lr = config.learning_rate;
        let back = norm.mul(&d_logits);
        let gw2 = hidden.t().dot(&back);
        let gb2 = d_logits.sum_axis(Axis(0));
        let mut d_pre = back.dot(&w2.value.t());
        Zip::from(&mut d_pre).and(&pre).for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
        let gw1 = ax.t().dot(&d_pre);
        let gb1 = d_pre.sum_axis(Axis(0));
        w1.adam(&gw1, lr, t);
        b1.adam(&gb1, lr, t);
        w2.adam(&gw2, lr, t);
        b2.adam(&gb2, lr, t);
    }
    Ok(best.expect("at least one epoch is evaluated"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn separable(n: usize) -> (Graph, Vec<Option<u32>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let labels: Vec<Option<u32>> = (0..n).map(|v| Some((v % 2) as u32)).collect();
        let x = Array2::from_shape_fn((n, 4), |(v, m)| {
            let noise: f64 = rng.sample(StandardNormal);
            let sign = if v % 2 == 0 { -1.0 } else { 1.0 };
            if m == 0 { 3.0 * sign + 0.5 * noise } else { noise }
        });
        let g = Graph::from_edges(n, &[]).unwrap().with_features(x).unwrap();
        (g, labels)
    }

    #[test]
    fn separable_features_without_edges() {
        let (g, labels) = separable(400);
        let split = Split::random(&labels, 1);
        let out = train_gcn(&g, &labels, &split, &GcnConfig { epochs: 300, ..GcnConfig::default() }).unwrap();
        let truth: Vec<u8> = split.test.iter().map(|&v| labels[v].unwrap() as u8).collect();
        assert!(f1_score(&out.predictions, &truth).unwrap() >= 0.95);
        assert!(roc_auc(&out.probabilities, &truth).unwrap() > 0.95);
    }

    #[test]
    fn constant_labels() {
        let (g, _) = separable(40);
        let labels = vec![Some(1); 40];
        let split = Split::random(&labels, 2);
        let out = train_gcn(&g, &labels, &split, &GcnConfig { epochs: 300, ..GcnConfig::default() }).unwrap();
        let truth = vec![1u8; split.test.len()];
        assert_eq!(f1_score(&out.predictions, &truth).unwrap(), 1.0);
        assert!(matches!(roc_auc(&out.probabilities, &truth), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn fixed_seed_reproduces() {
        let (g, labels) = separable(60);
        let split = Split::random(&labels, 3);
        let cfg = GcnConfig { epochs: 40, seed: 9, ..GcnConfig::default() };
        assert_eq!(train_gcn(&g, &labels, &split, &cfg).unwrap(), train_gcn(&g, &labels, &split, &cfg).unwrap());
    }

    #[test]
    fn split_is_disjoint_and_sized() {
        let mut labels = vec![Some(0); 103];
        labels[5] = None;
        let split = Split::random(&labels, 4);
        split.validate(&labels).unwrap();
        assert_eq!((split.train.len(), split.val.len(), split.test.len()), (51, 25, 26));
        assert!(!split.train.contains(&5) && !split.test.contains(&5));
    }

    #[test]
    fn overlapping_split_is_rejected() {
        let labels = vec![Some(0); 4];
        let split = Split { train: vec![0, 1], val: vec![1], test: vec![3] };
        assert!(matches!(split.validate(&labels), Err(Error::Validation(_))));
    }
}
