//! Lloyd's k-means with k-means++ seeding.
//!
//! Nearest-centroid ties go to the lowest centroid index. A centroid that
//! loses all of its points is moved onto the point farthest from its
//! current centroid.

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{component_rng, Stream};

/// Hard initial community labels and their one-hot matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityInit {
    pub labels: Vec<usize>,
    pub onehot: Array2<f64>,
    pub centroids: Array2<f64>,
    pub num_communities: usize,
}

impl CommunityInit {
    /// Builds the one-hot matrix from hard labels.
    pub fn from_labels(labels: Vec<usize>, centroids: Array2<f64>, num_communities: usize) -> Result<Self> {
        let mut onehot = Array2::zeros((labels.len(), num_communities));
        for (i, &l) in labels.iter().enumerate() {
            if l >= num_communities {
                return Err(Error::Validation(format!(
                    "label {l} of node {i} exceeds community count {num_communities}"
                )));
            }
            onehot[[i, l]] = 1.0;
        }
        Ok(Self {
            labels,
            onehot,
            centroids,
            num_communities,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest centroid.
fn nearest(point: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_seeds<R: Rng>(points: &Array2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `acc` just below `target`
            pick.unwrap_or_else(|| dist.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // all remaining points coincide with a centre
            (0..n).find(|i| !chosen.contains(i)).unwrap()
        };
        chosen.push(next);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    let mut centroids = Array2::zeros((k, points.ncols()));
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).assign(&points.row(i));
    }
    centroids
}

pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, max_iters: usize) -> Result<CommunityInit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::Domain(format!(
            "k-means needs 1 <= k <= N (k={k}, N={n})"
        )));
    }
    let mut rng = component_rng(seed, Stream::KMeans);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);
    let mut labels = vec![usize::MAX; n];

    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut dists = vec![0.0; n];
        for i in 0..n {
            let (c, d) = nearest(points.row(i), &centroids);
            dists[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }

        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in labels.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &points.row(i));
            counts[c] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mean = &sums.row(c) / counts[c] as f64;
                centroids.row_mut(c).assign(&mean);
                continue;
            }
            // empty cluster: take the worst-served point
            let far = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                counts[labels[i]] -= 1;
                counts[c] = 1;
                labels[i] = c;
                dists[i] = 0.0;
                centroids.row_mut(c).assign(&points.row(i));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    CommunityInit::from_labels(labels, centroids, k)
}

/// Sum of squared distances to assigned centroids.
pub fn inertia(points: &Array2<f64>, init: &CommunityInit) -> f64 {
    init.labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(points.row(i), init.centroids.row(c)))
        .sum()
}
