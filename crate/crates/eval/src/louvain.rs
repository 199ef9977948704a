//! Louvain modularity optimisation: greedy local moves followed by
//! aggregation of communities into super-nodes, repeated until modularity
//! stops improving.

use std::collections::BTreeMap;

use fairlink::rng::{component_rng, Stream};
use fairlink::Graph;
use rand::seq::SliceRandom;

const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Weighted {
    adj: Vec<Vec<(usize, f64)>>,
    /// Weight of edges folded inside each super-node, counted once.
    loops: Vec<f64>,
}

impl Weighted {
    fn from_graph(g: &Graph) -> Self {
        let adj = (0..g.num_nodes())
            .map(|i| g.neighbors(i).iter().map(|&j| (j, 1.0)).collect())
            .collect();
        Self { adj, loops: vec![0.0; g.num_nodes()] }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn strength(&self, i: usize) -> f64 {
        self.adj[i].iter().map(|e| e.1).sum::<f64>() + 2.0 * self.loops[i]
    }

    fn modularity(&self, community: &[usize]) -> f64 {
        let k: Vec<f64> = (0..self.len()).map(|i| self.strength(i)).collect();
        let m2: f64 = k.iter().sum();
        if m2 == 0.0 {
            return 0.0;
        }
        let c = community.iter().max().map_or(0, |&m| m + 1);
        let mut inside = vec![0.0; c];
        let mut total = vec![0.0; c];
        for i in 0..self.len() {
            total[community[i]] += k[i];
            inside[community[i]] += 2.0 * self.loops[i];
            for &(j, w) in &self.adj[i] {
                if community[j] == community[i] {
                    inside[community[i]] += w;
                }
            }
        }
        (0..c).map(|x| inside[x] / m2 - (total[x] / m2).powi(2)).sum()
    }

    /// Moves single nodes between communities while any move increases
    /// modularity. Returns the communities and whether anything moved.
    fn local_moves(&self, order: &[usize]) -> (Vec<usize>, bool) {
        let n = self.len();
        let k: Vec<f64> = (0..n).map(|i| self.strength(i)).collect();
        let m2: f64 = k.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        let mut total = k.clone();
        let mut moved_any = false;
        let mut links: BTreeMap<usize, f64> = BTreeMap::new();
        loop {
            let mut moved = false;
            for &i in order {
                let own = community[i];
                links.clear();
                links.insert(own, 0.0);
                for &(j, w) in &self.adj[i] {
                    *links.entry(community[j]).or_insert(0.0) += w;
                }
                total[own] -= k[i];
                let gain = |c: usize, w: f64| w - total[c] * k[i] / m2;
                // ascending community order, so near-ties go to the lowest index
                let mut best = (own, gain(own, links[&own]));
                for (&c, &w) in &links {
                    let g = gain(c, w);
                    if g > best.1 + 1e-12 {
                        best = (c, g);
                    }
                }
                total[best.0] += k[i];
                if best.0 != own {
                    community[i] = best.0;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (compact(&community), moved_any)
    }

    fn aggregate(&self, community: &[usize]) -> Self {
        let c = community.iter().max().map_or(0, |&m| m + 1);
        let mut loops = vec![0.0; c];
        let mut weights: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); c];
        for i in 0..self.len() {
            let ci = community[i];
            loops[ci] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                let cj = community[j];
                if ci == cj {
                    // each internal edge is seen from both ends
                    loops[ci] += w / 2.0;
                } else {
                    *weights[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        Self {
            adj: weights.into_iter().map(|m| m.into_iter().collect()).collect(),
            loops,
        }
    }
}

/// Renumbers labels 0.. in order of first appearance.
fn compact(labels: &[usize]) -> Vec<usize> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Modularity of a partition of an unweighted graph.
pub fn modularity(g: &Graph, community: &[usize]) -> f64 {
    Weighted::from_graph(g).modularity(community)
}

/// Hard community labels, numbered 0.. by first appearance. The node visit
/// order of every pass is a seeded shuffle.
pub fn louvain(g: &Graph, seed: u64) -> Vec<usize> {
    let n = g.num_nodes();
    if g.num_edges() == 0 {
        log::warn!("louvain on an edgeless graph: every node is its own community");
        return (0..n).collect();
    }
    let mut rng = component_rng(seed, Stream::Louvain);
    let mut level = Weighted::from_graph(g);
    let mut assignment: Vec<usize> = (0..n).collect();
    let mut quality = level.modularity(&(0..level.len()).collect::<Vec<_>>());
    loop {
        let mut order: Vec<usize> = (0..level.len()).collect();
        order.shuffle(&mut rng);
        let (community, moved) = level.local_moves(&order);
        if !moved {
            break;
        }
        let next = level.modularity(&community);
        if next - quality <= MIN_GAIN {
            break;
        }
        quality = next;
        for a in assignment.iter_mut() {
            *a = community[*a];
        }
        level = level.aggregate(&community);
    }
    compact(&assignment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clique(nodes: std::ops::Range<usize>) -> Vec<(usize, usize)> {
        let v: Vec<usize> = nodes.collect();
        v.iter().flat_map(|&a| v.iter().filter(move |&&b| a < b).map(move |&b| (a, b))).collect()
    }

    #[test]
    fn two_disjoint_cliques() {
        let mut edges = clique(0..5);
        edges.extend(clique(5..11));
        let g = Graph::from_edges(11, &edges).unwrap();
        for seed in 0..5 {
            let c = louvain(&g, seed);
            assert!(c[..5].iter().all(|&x| x == c[0]));
            assert!(c[5..].iter().all(|&x| x == c[5]));
            assert_ne!(c[0], c[5]);
        }
    }

    #[test]
    fn single_clique_is_one_community() {
        let g = Graph::from_edges(6, &clique(0..6)).unwrap();
        assert!(louvain(&g, 1).iter().all(|&c| c == 0));
    }

    #[test]
    fn edgeless_graph_gives_singletons() {
        let g = Graph::from_edges(4, &[]).unwrap();
        assert_eq!(louvain(&g, 0), vec![0, 1, 2, 3]);
    }

    #[test]
    fn modularity_by_hand() {
        // two triangles joined by one edge, split at the bridge
        let mut edges = clique(0..3);
        edges.extend(clique(3..6));
        edges.push((2, 3));
        let g = Graph::from_edges(6, &edges).unwrap();
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]);
        assert!((q - (12.0 / 14.0 - 2.0 * (7.0f64 / 14.0).powi(2))).abs() < 1e-15);
        assert_eq!(modularity(&g, &[0; 6]), 0.0);
        assert_eq!(louvain(&g, 3), vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn aggregation_preserves_modularity() {
        let mut edges = clique(0..4);
        edges.extend([(3, 4), (4, 5), (5, 6), (6, 4), (0, 6)]);
        let g = Graph::from_edges(7, &edges).unwrap();
        let w = Weighted::from_graph(&g);
        let part = vec![0, 0, 0, 0, 1, 1, 1];
        let coarse = w.aggregate(&part);
        assert!((coarse.modularity(&[0, 1]) - w.modularity(&part)).abs() < 1e-15);
        assert!((coarse.modularity(&[0, 0]) - w.modularity(&[0; 7])).abs() < 1e-15);
    }
}
