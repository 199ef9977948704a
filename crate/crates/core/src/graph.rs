//! Undirected attributed graphs in mirrored CSR form.
//!
//! A [`Graph`] owns its structure (sorted neighbour lists for both
//! orientations of every edge), the dense node feature matrix, the binary
//! sensitive attribute and optional task labels. Graphs are immutable:
//! [`Graph::add_edges`] returns a new value.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Canonical orientation of an unordered pair.
#[inline]
pub fn ordered(i: usize, j: usize) -> (usize, usize) {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Array2<f64>,
    sensitive: Vec<u8>,
    labels: Option<Vec<Option<u32>>>,
}

impl Graph {
    /// Builds a graph from unordered pairs. Reciprocal and repeated pairs are
    /// merged, self-loops are dropped.
    pub fn new<I>(
        num_nodes: usize,
        pairs: I,
        features: Array2<f64>,
        sensitive: Vec<u8>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if features.nrows() != num_nodes {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows, expected {num_nodes}",
                features.nrows()
            )));
        }
        if sensitive.len() != num_nodes {
            return Err(Error::Validation(format!(
                "sensitive vector has {} entries, expected {num_nodes}",
                sensitive.len()
            )));
        }
        if let Some(&bad) = sensitive.iter().find(|&&v| v > 1) {
            return Err(Error::Domain(format!(
                "sensitive attribute value {bad} is not 0 or 1"
            )));
        }

        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        let mut self_loops = 0usize;
        for (i, j) in pairs {
            for node in [i, j] {
                if node >= num_nodes {
                    return Err(Error::IndexOutOfRange { node, num_nodes });
                }
            }
            if i == j {
                self_loops += 1;
                continue;
            }
            lists[i].push(j);
            lists[j].push(i);
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s)");
        }

        let mut offsets = Vec::with_capacity(num_nodes + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut list in lists {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(&list);
            offsets.push(neighbors.len());
        }

        Ok(Self {
            num_nodes,
            offsets,
            neighbors,
            features,
            sensitive,
            labels: None,
        })
    }

    /// Structure-only graph: zero-width features, every node in group 0.
    pub fn from_edges(num_nodes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(
            num_nodes,
            pairs.iter().copied(),
            Array2::zeros((num_nodes, 0)),
            vec![0; num_nodes],
        )
    }

    pub fn with_labels(mut self, labels: Vec<Option<u32>>) -> Result<Self> {
        if labels.len() != self.num_nodes {
            return Err(Error::Validation(format!(
                "label vector has {} entries, expected {}",
                labels.len(),
                self.num_nodes
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_sensitive(mut self, sensitive: Vec<u8>) -> Result<Self> {
        if sensitive.len() != self.num_nodes {
            return Err(Error::Validation(format!(
                "sensitive vector has {} entries, expected {}",
                sensitive.len(),
                self.num_nodes
            )));
        }
        if let Some(&bad) = sensitive.iter().find(|&&v| v > 1) {
            return Err(Error::Domain(format!(
                "sensitive attribute value {bad} is not 0 or 1"
            )));
        }
        self.sensitive = sensitive;
        Ok(self)
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes {
            return Err(Error::Validation(format!(
                "feature matrix has {} rows, expected {}",
                features.nrows(),
                self.num_nodes
            )));
        }
        self.features = features;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_nodes).map(|i| self.degree(i)).collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.num_nodes && j < self.num_nodes && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Every edge once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn sensitive(&self) -> &[u8] {
        &self.sensitive
    }

    pub fn labels(&self) -> Option<&[Option<u32>]> {
        self.labels.as_deref()
    }

    /// Dense 0/1 adjacency matrix. Intended for small graphs and tests.
    pub fn dense_adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.num_nodes, self.num_nodes));
        for i in 0..self.num_nodes {
            for &j in self.neighbors(i) {
                a[[i, j]] = 1.0;
            }
        }
        a
    }

    /// Number of unordered non-adjacent pairs.
    pub fn num_candidates(&self) -> usize {
        let n = self.num_nodes;
        n * n.saturating_sub(1) / 2 - self.num_edges()
    }

    /// Unordered non-edges `(i, j)`, `i < j`, in lexicographic order.
    pub fn candidate_edges(&self) -> CandidateEdges<'_> {
        CandidateEdges {
            graph: self,
            row: 0,
            col: 1,
            cursor: 0,
        }
    }

    /// Checks the structural invariants: sorted unique neighbour lists,
    /// symmetry and the absence of self-loops.
    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() != self.num_nodes + 1 {
            return Err(Error::Validation("offset array has wrong length".into()));
        }
        for i in 0..self.num_nodes {
            let nbrs = self.neighbors(i);
            for w in nbrs.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::Validation(format!(
                        "neighbour list of node {i} is not strictly increasing"
                    )));
                }
            }
            for &j in nbrs {
                if j >= self.num_nodes {
                    return Err(Error::IndexOutOfRange {
                        node: j,
                        num_nodes: self.num_nodes,
                    });
                }
                if j == i {
                    return Err(Error::Validation(format!("self-loop on node {i}")));
                }
                if self.neighbors(j).binary_search(&i).is_err() {
                    return Err(Error::Validation(format!(
                        "edge ({i}, {j}) has no reverse entry"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Adds a batch of new edges. The whole batch is rejected if any pair is a
    /// self-pair, out of range, already present, or repeated within the batch.
    pub fn add_edges(&self, batch: &EdgeBatch) -> Result<Graph> {
        let mut seen = std::collections::HashSet::with_capacity(batch.pairs.len());
        for &(a, b) in &batch.pairs {
            for node in [a, b] {
                if node >= self.num_nodes {
                    return Err(Error::IndexOutOfRange {
                        node,
                        num_nodes: self.num_nodes,
                    });
                }
            }
            if a == b {
                return Err(Error::Constraint(format!("self-pair ({a}, {b}) in batch")));
            }
            if self.has_edge(a, b) {
                return Err(Error::Constraint(format!("edge ({a}, {b}) already present")));
            }
            if !seen.insert(ordered(a, b)) {
                return Err(Error::Constraint(format!(
                    "edge ({a}, {b}) repeated within batch"
                )));
            }
        }

        let mut extra: Vec<Vec<usize>> = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &batch.pairs {
            extra[a].push(b);
            extra[b].push(a);
        }
        let mut offsets = Vec::with_capacity(self.num_nodes + 1);
        let mut neighbors = Vec::with_capacity(self.neighbors.len() + 2 * batch.pairs.len());
        offsets.push(0);
        for (i, mut add) in extra.into_iter().enumerate() {
            if add.is_empty() {
                neighbors.extend_from_slice(self.neighbors(i));
            } else {
                add.extend_from_slice(self.neighbors(i));
                add.sort_unstable();
                neighbors.extend_from_slice(&add);
            }
            offsets.push(neighbors.len());
        }

        Ok(Graph {
            num_nodes: self.num_nodes,
            offsets,
            neighbors,
            features: self.features.clone(),
            sensitive: self.sensitive.clone(),
            labels: self.labels.clone(),
        })
    }

    /// Symmetric normalisation of `A + I`.
    pub fn normalized_adjacency(&self) -> NormAdj {
        NormAdj::new(self)
    }
}

/// Iterator over non-edges in lexicographic order.
pub struct CandidateEdges<'a> {
    graph: &'a Graph,
    row: usize,
    col: usize,
    cursor: usize,
}

impl Iterator for CandidateEdges<'_> {
    type Item = (usize, usize);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.graph.num_nodes;
        while self.row < n {
            let nbrs = self.graph.neighbors(self.row);
            while self.col < n {
                let j = self.col;
                self.col += 1;
                while self.cursor < nbrs.len() && nbrs[self.cursor] < j {
                    self.cursor += 1;
                }
                if self.cursor < nbrs.len() && nbrs[self.cursor] == j {
                    continue;
                }
                return Some((self.row, j));
            }
            self.row += 1;
            self.col = self.row + 1;
            self.cursor = 0;
        }
        None
    }
}

/// A batch of pairs proposed for addition in one pipeline round.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeBatch {
    pub pairs: Vec<(usize, usize)>,
    pub iteration: usize,
}

impl EdgeBatch {
    pub fn new(iteration: usize, pairs: Vec<(usize, usize)>) -> Self {
        Self {
            pairs: pairs.into_iter().map(|(a, b)| ordered(a, b)).collect(),
            iteration,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` in CSR form, `D` the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    degree: Vec<f64>,
}

impl NormAdj {
    fn new(g: &Graph) -> Self {
        let n = g.num_nodes();
        let degree: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::with_capacity(g.neighbors.len() + n);
        let mut values = Vec::with_capacity(g.neighbors.len() + n);
        offsets.push(0);
        for i in 0..n {
            let nbrs = g.neighbors(i);
            let split = nbrs.partition_point(|&j| j < i);
            for &j in &nbrs[..split] {
                cols.push(j);
                values.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            cols.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
            for &j in &nbrs[split..] {
                cols.push(j);
                values.push(inv_sqrt[i] * inv_sqrt[j]);
            }
            offsets.push(cols.len());
        }
        Self {
            offsets,
            cols,
            values,
            degree,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.degree.len()
    }

    /// Degrees of `A + I`.
    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// Row `i` as parallel slices of column indices and values.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[i]..self.offsets[i + 1];
        (&self.cols[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(p) => vals[p],
            Err(_) => 0.0,
        }
    }

    /// `Â · x` for a dense right-hand side.
    pub fn mul(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.num_nodes(), x.ncols()));
        self.mul_into(x, &mut out);
        out
    }

    pub(crate) fn mul_into(&self, x: &Array2<f64>, out: &mut Array2<f64>) {
        debug_assert_eq!(x.nrows(), self.num_nodes());
        for i in 0..self.num_nodes() {
            let (cols, vals) = self.row(i);
            let mut row = out.row_mut(i);
            row.fill(0.0);
            for (&j, &v) in cols.iter().zip(vals) {
                row.scaled_add(v, &x.row(j));
            }
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[[i, j]] = v;
            }
        }
        m
    }
}
