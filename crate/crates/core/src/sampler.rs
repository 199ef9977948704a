//! Fairness-guided link addition.
//!
//! Each round propagates the fixed initial communities over the current
//! graph, takes the structure gradient of their soft statistical parity,
//! boosts candidates that join different sensitive groups, perturbs the log
//! scores with Gumbel noise and adds the top-k pairs.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::distr::Open01;
use rand::Rng;

use crate::community::{
    initialize_communities, pseudo_task_loss, AutoencoderConfig, CommunityInit, InitConfig,
};
use crate::error::{Error, Result};
use crate::graph::{EdgeBatch, Graph};
use crate::meta_gradient::{meta_gradient_with, soft_parity_with_grad, DegreeMode, MetaGradient};
use crate::rng::{component_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GuideConfig {
    /// Total number of links that may be added.
    pub budget: usize,
    /// Links added per round.
    pub batch_size: usize,
    /// Multiplicative boost for pairs across sensitive groups.
    pub beta: f64,
    /// Gumbel temperature. Top-k selection does not depend on it.
    pub tau: f64,
    pub epsilon: f64,
    /// Restart probability of the propagation.
    pub alpha: f64,
    /// Propagation depth.
    pub steps: usize,
    pub num_communities: usize,
    pub autoencoder: AutoencoderConfig,
    pub kmeans_iters: usize,
    pub degree_mode: DegreeMode,
    pub seed: u64,
}

impl Default for GuideConfig {
    fn default() -> Self {
        Self {
            budget: 0,
            batch_size: 100,
            beta: 4.0,
            tau: 1.0,
            epsilon: 1e-12,
            alpha: 0.1,
            steps: 10,
            num_communities: 10,
            autoencoder: AutoencoderConfig::default(),
            kmeans_iters: 100,
            degree_mode: DegreeMode::Exact,
            seed: 0,
        }
    }
}

impl GuideConfig {
    pub fn init_config(&self) -> InitConfig {
        InitConfig {
            autoencoder: self.autoencoder,
            num_communities: self.num_communities,
            kmeans_iters: self.kmeans_iters,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Domain(m));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail(format!("beta {} must be a finite non-negative number", self.beta));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return fail(format!("tau {} must be positive", self.tau));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return fail(format!("epsilon {} must be non-negative", self.epsilon));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if self.steps == 0 {
            return fail("propagation needs at least one step".into());
        }
        if self.num_communities == 0 {
            return fail("need at least one community".into());
        }
        Ok(())
    }
}

/// A candidate pair with a positive adjusted score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub i: usize,
    pub j: usize,
    pub score: f64,
}

#[inline]
fn boost(beta: f64, si: u8, sj: u8) -> f64 {
    if si != sj {
        1.0 + beta
    } else {
        1.0
    }
}

/// `−∇_ij · (1 + β·[s_i ≠ s_j])` for every non-edge, keeping only positive
/// scores. Lexicographic order.
pub fn adjusted_scores(grad: &MetaGradient, g: &Graph, beta: f64) -> Vec<ScoredPair> {
    let s = g.sensitive();
    grad.candidate_gradients(g)
        .filter_map(|(i, j, v)| {
            let score = -v * boost(beta, s[i], s[j]);
            (score > 0.0).then_some(ScoredPair { i, j, score })
        })
        .collect()
}

/// Standard Gumbel sample `−ln(−ln u)`, `u ∈ (0, 1)`.
pub fn gumbel_noise<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -(-u.ln()).ln()
}

#[inline]
fn perturb(score: f64, noise: f64, tau: f64, epsilon: f64) -> f64 {
    ((score + epsilon).ln() + noise) / tau
}

/// `(ln(score + ε) + g) / τ` with one Gumbel draw per pair, in input order.
pub fn gumbel_perturb<R: Rng>(
    scores: &[ScoredPair],
    tau: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<ScoredPair>> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau {tau} must be positive")));
    }
    scores
        .iter()
        .map(|p| {
            if !(p.score > 0.0) {
                return Err(Error::Numerical(format!(
                    "non-positive score {} reached sampling for ({}, {})",
                    p.score, p.i, p.j
                )));
            }
            let noise = gumbel_noise(rng);
            Ok(ScoredPair {
                score: perturb(p.score, noise, tau, epsilon),
                ..*p
            })
        })
        .collect()
}

/// Result of a top-k selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TopK {
    /// Selected pairs, best first.
    pub pairs: Vec<(usize, usize)>,
    /// Fewer than `k` candidates were available.
    pub truncated: bool,
}

/// Max-ordering on perturbed score; exact ties favour the lexicographically
/// smaller pair.
#[derive(Debug, Clone, Copy)]
struct Ranked(ScoredPair);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .score
            .total_cmp(&other.0.score)
            .then_with(|| (other.0.i, other.0.j).cmp(&(self.0.i, self.0.j)))
    }
}

/// Streaming top-k over ranked pairs.
struct TopKHeap {
    k: usize,
    heap: BinaryHeap<Reverse<Ranked>>,
}

impl TopKHeap {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn push(&mut self, p: ScoredPair) {
        if self.k == 0 {
            return;
        }
        let r = Ranked(p);
        if self.heap.len() < self.k {
            self.heap.push(Reverse(r));
        } else if r > self.heap.peek().unwrap().0 {
            self.heap.pop();
            self.heap.push(Reverse(r));
        }
    }

    fn finish(self) -> TopK {
        let truncated = self.heap.len() < self.k;
        let mut ranked: Vec<Ranked> = self.heap.into_iter().map(|r| r.0).collect();
        ranked.sort_by(|a, b| b.cmp(a));
        TopK {
            pairs: ranked.into_iter().map(|r| (r.0.i, r.0.j)).collect(),
            truncated,
        }
    }
}

pub fn select_topk(perturbed: &[ScoredPair], k: usize) -> Result<TopK> {
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let mut heap = TopKHeap::new(k);
    for &p in perturbed {
        heap.push(p);
    }
    Ok(heap.finish())
}

/// Fused scoring, perturbation and selection over all candidates. Draws
/// noise in the same order as [`adjusted_scores`] followed by
/// [`gumbel_perturb`], so it selects the same pairs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sample_batch<R: Rng>(
    grad: &MetaGradient,
    g: &Graph,
    beta: f64,
    tau: f64,
    epsilon: f64,
    k: usize,
    rng: &mut R,
) -> (TopK, usize) {
    let s = g.sensitive();
    let mut heap = TopKHeap::new(k);
    let mut tiny = 0usize;
    for (i, j) in g.candidate_edges() {
        let score = -grad.get(i, j) * boost(beta, s[i], s[j]);
        if score > 0.0 {
            if score < epsilon {
                tiny += 1;
            }
            let noise = gumbel_noise(rng);
            heap.push(ScoredPair {
                i,
                j,
                score: perturb(score, noise, tau, epsilon),
            });
        }
    }
    (heap.finish(), tiny)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuideStatus {
    /// The full budget was spent.
    Completed,
    /// No candidate with a positive score remained before the budget ran out.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct GuideResult {
    pub additions: Vec<EdgeBatch>,
    /// Soft statistical parity before the first round and after each round.
    pub loss_trace: Vec<f64>,
    pub cross_group_fraction: Vec<f64>,
    pub graph: Graph,
    pub status: GuideStatus,
    /// Candidates whose positive score was below `epsilon`.
    pub tiny_scores: usize,
    /// Wall time of each round (not part of any saved output).
    pub round_seconds: Vec<f64>,
}

impl GuideResult {
    pub fn total_added(&self) -> usize {
        self.additions.iter().map(EdgeBatch::len).sum()
    }

    pub fn iterations(&self) -> usize {
        self.additions.len()
    }

    /// Mean cross-group fraction over all added links.
    pub fn overall_cross_group_fraction(&self) -> Option<f64> {
        let total = self.total_added();
        if total == 0 {
            return None;
        }
        let cross: f64 = self
            .additions
            .iter()
            .zip(&self.cross_group_fraction)
            .map(|(b, f)| f * b.len() as f64)
            .sum();
        Some(cross / total as f64)
    }

    /// `iteration,soft_dsp_before,soft_dsp_after,batch_size,cross_group_fraction`
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = fs::File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        writeln!(w, "iteration,soft_dsp_before,soft_dsp_after,batch_size,cross_group_fraction")
            .map_err(io)?;
        for (t, batch) in self.additions.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                batch.iteration,
                self.loss_trace[t],
                self.loss_trace[t + 1],
                batch.len(),
                self.cross_group_fraction[t]
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Runs the full pipeline: fits the initial communities once, then adds
/// links in rounds until the budget is spent.
pub fn guide(g: &Graph, cfg: &GuideConfig) -> Result<GuideResult> {
    cfg.validate()?;
    check_budget(g, cfg)?;
    let init = initialize_communities(g, &cfg.init_config())?;
    guide_with_init(g, &init, cfg)
}

fn check_budget(g: &Graph, cfg: &GuideConfig) -> Result<()> {
    let available = g.num_candidates();
    if cfg.budget > available {
        return Err(Error::Constraint(format!(
            "budget {} exceeds the {available} candidate pairs",
            cfg.budget
        )));
    }
    Ok(())
}

/// The round loop with precomputed initial communities.
pub fn guide_with_init(g: &Graph, init: &CommunityInit, cfg: &GuideConfig) -> Result<GuideResult> {
    cfg.validate()?;
    check_budget(g, cfg)?;
    if init.num_nodes() != g.num_nodes() {
        return Err(Error::Validation(format!(
            "initial labels cover {} nodes, graph has {}",
            init.num_nodes(),
            g.num_nodes()
        )));
    }

    let mut rng = component_rng(cfg.seed, Stream::Gumbel);
    let mut current = g.clone();
    let mut additions = Vec::new();
    let mut cross_group_fraction = Vec::new();
    let mut round_seconds = Vec::new();
    let mut tiny_scores = 0;
    let mut loss_trace = vec![pseudo_task_loss(&current, init, cfg.alpha, cfg.steps)?];
    let mut added = 0usize;
    let mut status = GuideStatus::Completed;

    while added < cfg.budget {
        let started = Instant::now();
        let iteration = additions.len();
        let k = cfg.batch_size.min(cfg.budget - added);
        let grad = meta_gradient_with(
            &current,
            init,
            cfg.alpha,
            cfg.steps,
            cfg.degree_mode,
            soft_parity_with_grad,
        )
        .map_err(|e| with_round(e, iteration))?;
        let (top, tiny) = sample_batch(&grad, &current, cfg.beta, cfg.tau, cfg.epsilon, k, &mut rng);
        tiny_scores += tiny;
        if tiny > 0 {
            log::warn!("round {iteration}: {tiny} positive score(s) below epsilon");
        }
        if top.pairs.is_empty() {
            log::warn!(
                "round {iteration}: no bias-reducing candidates left after {added} of {} links",
                cfg.budget
            );
            status = GuideStatus::Exhausted;
            break;
        }

        let s = current.sensitive();
        let cross = top.pairs.iter().filter(|&&(i, j)| s[i] != s[j]).count();
        let batch = EdgeBatch::new(iteration, top.pairs);
        current = current.add_edges(&batch).map_err(|e| with_round(e, iteration))?;
        added += batch.len();
        cross_group_fraction.push(cross as f64 / batch.len() as f64);
        let after = pseudo_task_loss(&current, init, cfg.alpha, cfg.steps)?;
        log::info!(
            "round {iteration}: +{} links, soft dsp {:.6} -> {:.6}",
            batch.len(),
            loss_trace.last().unwrap(),
            after
        );
        loss_trace.push(after);
        additions.push(batch);
        round_seconds.push(started.elapsed().as_secs_f64());
        if top.truncated {
            status = GuideStatus::Exhausted;
            if added < cfg.budget {
                log::warn!("round {iteration}: candidate pool exhausted");
            }
            break;
        }
    }
    if status == GuideStatus::Exhausted && added == cfg.budget {
        status = GuideStatus::Completed;
    }

    Ok(GuideResult {
        additions,
        loss_trace,
        cross_group_fraction,
        graph: current,
        status,
        tiny_scores,
        round_seconds,
    })
}

fn with_round(e: Error, round: usize) -> Error {
    match e {
        Error::Numerical(m) => Error::Numerical(format!("round {round}: {m}")),
        Error::Constraint(m) => Error::Constraint(format!("round {round}: {m}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta_gradient::meta_gradient;
    use ndarray::Array2;

    fn sp(i: usize, j: usize, score: f64) -> ScoredPair {
        ScoredPair { i, j, score }
    }

    #[test]
    fn topk_basic() {
        let p = [sp(0, 1, 1.0), sp(0, 2, 3.0), sp(1, 2, 2.0)];
        let t = select_topk(&p, 2).unwrap();
        assert_eq!(t.pairs, vec![(0, 2), (1, 2)]);
        assert!(!t.truncated);
        let all = select_topk(&p, 5).unwrap();
        assert_eq!(all.pairs.len(), 3);
        assert!(all.truncated);
    }

    #[test]
    fn topk_tie_prefers_smaller_pair() {
        let p = [sp(1, 2, 1.0), sp(0, 3, 1.0)];
        assert_eq!(select_topk(&p, 1).unwrap().pairs, vec![(0, 3)]);
        let q = [sp(0, 3, 1.0), sp(1, 2, 1.0)];
        assert_eq!(select_topk(&q, 1).unwrap().pairs, vec![(0, 3)]);
    }

    #[test]
    fn topk_empty_input() {
        let t = select_topk(&[], 3).unwrap();
        assert!(t.pairs.is_empty() && t.truncated);
        assert!(select_topk(&[], 0).is_err());
    }

    #[test]
    fn perturb_rejects_non_positive() {
        let mut rng = component_rng(0, Stream::Gumbel);
        assert!(gumbel_perturb(&[sp(0, 1, 0.0)], 1.0, 1e-12, &mut rng).is_err());
        assert!(gumbel_perturb(&[sp(0, 1, 1.0)], 0.0, 1e-12, &mut rng).is_err());
    }

    #[test]
    fn perturb_is_deterministic_and_tau_invariant_in_order() {
        let scores: Vec<ScoredPair> = (0..50).map(|k| sp(k, k + 1, 0.01 * (k + 1) as f64)).collect();
        let a = gumbel_perturb(&scores, 1.0, 1e-12, &mut component_rng(4, Stream::Gumbel)).unwrap();
        let b = gumbel_perturb(&scores, 1.0, 1e-12, &mut component_rng(4, Stream::Gumbel)).unwrap();
        let c = gumbel_perturb(&scores, 0.5, 1e-12, &mut component_rng(4, Stream::Gumbel)).unwrap();
        assert_eq!(a, b);
        assert_eq!(select_topk(&a, 10).unwrap(), select_topk(&c, 10).unwrap());
    }

    #[test]
    fn single_candidate_always_selected() {
        for seed in 0..20 {
            let p = gumbel_perturb(&[sp(2, 5, 1e-3)], 1.0, 1e-12, &mut component_rng(seed, Stream::Gumbel))
                .unwrap();
            assert_eq!(select_topk(&p, 1).unwrap().pairs, vec![(2, 5)]);
        }
    }

    fn small_case() -> (Graph, CommunityInit) {
        let edges = [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7), (3, 4)];
        let g = Graph::from_edges(8, &edges)
            .unwrap()
            .with_sensitive(vec![0, 0, 0, 0, 1, 1, 1, 1])
            .unwrap();
        let init = CommunityInit::from_labels(vec![0, 0, 1, 0, 1, 1, 2, 1], Array2::zeros((3, 1)), 3).unwrap();
        (g, init)
    }

    #[test]
    fn adjusted_scores_apply_boost_and_filter() {
        let (g, init) = small_case();
        let grad = meta_gradient(&g, &init, 0.1, 3).unwrap();
        let plain = adjusted_scores(&grad, &g, 0.0);
        let boosted = adjusted_scores(&grad, &g, 4.0);
        assert_eq!(plain.len(), boosted.len());
        for (p, b) in plain.iter().zip(&boosted) {
            assert_eq!(p.score, -grad.get(p.i, p.j));
            let factor = if g.sensitive()[p.i] != g.sensitive()[p.j] { 5.0 } else { 1.0 };
            assert_eq!(b.score, p.score * factor);
        }
        let excluded = grad
            .candidate_gradients(&g)
            .filter(|&(_, _, v)| v >= 0.0)
            .count();
        assert_eq!(plain.len() + excluded, g.num_candidates());
    }

    #[test]
    fn fused_sampling_matches_composition() {
        let (g, init) = small_case();
        let grad = meta_gradient(&g, &init, 0.1, 3).unwrap();
        let scores = adjusted_scores(&grad, &g, 4.0);
        let perturbed = gumbel_perturb(&scores, 0.7, 1e-12, &mut component_rng(9, Stream::Gumbel)).unwrap();
        let composed = select_topk(&perturbed, 3).unwrap();
        let (fused, _) = sample_batch(&grad, &g, 4.0, 0.7, 1e-12, 3, &mut component_rng(9, Stream::Gumbel));
        assert_eq!(composed, fused);
    }

    #[test]
    fn zero_budget_is_identity() {
        let (g, init) = small_case();
        let cfg = GuideConfig {
            budget: 0,
            num_communities: 3,
            steps: 3,
            ..GuideConfig::default()
        };
        let r = guide_with_init(&g, &init, &cfg).unwrap();
        assert_eq!(r.graph, g);
        assert!(r.additions.is_empty());
        assert_eq!(r.loss_trace.len(), 1);
    }

    #[test]
    fn budget_beyond_candidates_is_rejected() {
        let (g, init) = small_case();
        let cfg = GuideConfig {
            budget: g.num_candidates() + 1,
            ..GuideConfig::default()
        };
        assert!(matches!(guide_with_init(&g, &init, &cfg), Err(Error::Constraint(_))));
    }

    #[test]
    fn rounds_respect_budget_and_batch() {
        let (g, init) = small_case();
        let cfg = GuideConfig {
            budget: 5,
            batch_size: 2,
            steps: 3,
            num_communities: 3,
            seed: 1,
            ..GuideConfig::default()
        };
        let r = guide_with_init(&g, &init, &cfg).unwrap();
        assert!(r.total_added() <= 5);
        assert!(r.additions.iter().all(|b| b.len() <= 2));
        assert_eq!(r.loss_trace.len(), r.iterations() + 1);
        for (t, b) in r.additions.iter().enumerate() {
            assert_eq!(b.iteration, t);
        }
        for (i, j) in g.edges() {
            assert!(r.graph.has_edge(i, j));
        }
        r.graph.validate().unwrap();
    }

    #[test]
    fn trace_csv_layout() {
        let (g, init) = small_case();
        let cfg = GuideConfig {
            budget: 3,
            batch_size: 2,
            steps: 3,
            num_communities: 3,
            ..GuideConfig::default()
        };
        let r = guide_with_init(&g, &init, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        r.write_trace_csv(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), r.iterations() + 1);
        assert!(lines[0].starts_with("iteration,soft_dsp_before"));
    }
}
