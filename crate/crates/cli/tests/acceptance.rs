//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Criteria listed in `KNOWN_UNMET` are still run at full strength and
//! reported as FAIL, but do not fail the process. The measurements behind
//! each entry are recorded in the project notes and the README.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_PI_2;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fairlink::community::{initialize_communities, CommunityInit};
use fairlink::meta_gradient::{finite_difference_oracle, meta_gradient};
use fairlink::metrics::{correlation_bound, delta_eo, delta_sp_binary, delta_sp_multiclass, delta_sp_soft, pearson};
use fairlink::sampler::guide_with_init;
use fairlink::{Graph, GuideConfig};
use fairlink_cli::commands::{EvaluateArgs, GenerateArgs, GuideArgs};
use fairlink_cli::settings::GuideOverrides;
use fairlink_cli::{cmd_evaluate, cmd_generate, cmd_guide};
use fairlink_eval::gcn::Split;
use fairlink_eval::{baseline_linkpred_add, baseline_random_add, evaluate, generate_sbm, EvalConfig, SbmSpec, DEFAULT_SEEDS};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KNOWN_UNMET: &[&str] = &["4a"];

struct Outcome {
    id: &'static str,
    title: &'static str,
    passed: bool,
    detail: String,
}

fn acceptance_spec(seed: u64) -> SbmSpec {
    SbmSpec {
        num_nodes: 200,
        num_blocks: 2,
        p_in: 0.1,
        p_out: 0.005,
        alignment: 0.95,
        label_noise: 0.1,
        seed,
        ..SbmSpec::default()
    }
}

fn budget_for(g: &Graph) -> usize {
    (0.02 * g.num_edges() as f64).round() as usize
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let combos: Vec<(usize, f64, usize)> = [1, 2, 4]
        .iter()
        .flat_map(|&k| [0.1, 0.5].iter().flat_map(move |&a| [2, 5].iter().map(move |&c| (k, a, c))))
        .collect();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut failures = 0;
    let mut zero_ok = true;
    for graph in 0..10u64 {
        let (steps, alpha, c) = combos[graph as usize % combos.len()];
        let g = generate_sbm(&SbmSpec { num_nodes: 20, p_in: 0.3, p_out: 0.05, seed: 100 + graph, ..SbmSpec::default() })
            .unwrap();
        let cfg = GuideConfig { num_communities: c, seed: graph, ..GuideConfig::default() };
        let init = initialize_communities(&g, &cfg.init_config()).unwrap();
        let grad = meta_gradient(&g, &init, alpha, steps).unwrap();
        // all 190 pairs of a 20-node graph, edges included
        for i in 0..20 {
            for j in i + 1..20 {
                let fd = finite_difference_oracle(&g, &init, alpha, steps, i, j, 1e-5).unwrap();
                let err = (grad.get(i, j) - fd).abs();
                let ratio = err / f64::max(1e-6, 1e-4 * fd.abs());
                worst = worst.max(ratio);
                failures += (ratio > 1.0) as usize;
                checked += 1;
            }
        }
        let flat = meta_gradient(&g, &init, 1.0, steps).unwrap();
        zero_ok &= flat.to_dense().iter().all(|&v| v == 0.0);
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome {
        id: "1",
        title: "gradient matches finite differences",
        passed: failures == 0 && zero_ok && secs < 60.0,
        detail: format!(
            "{checked} pairs, {failures} outside tolerance, worst error/tolerance {worst:.3e}, alpha=1 all zero: {zero_ok}, {secs:.1}s"
        ),
    }
}

fn brute_sp(preds: &[usize], s: &[u8]) -> f64 {
    let classes = preds.iter().max().map_or(0, |m| m + 1);
    let size = |g: u8| s.iter().filter(|&&x| x == g).count();
    let count = |g: u8, k: usize| preds.iter().zip(s).filter(|&(&p, &x)| x == g && p == k).count();
    let mut total = 0.0;
    for k in 0..classes {
        total += (count(0, k) as f64 / size(0) as f64 - count(1, k) as f64 / size(1) as f64).abs();
    }
    0.5 * total
}

fn brute_binary(preds: &[u8], s: &[u8]) -> f64 {
    let rate = |g: u8| {
        let members: Vec<usize> = (0..s.len()).filter(|&i| s[i] == g).collect();
        members.iter().filter(|&&i| preds[i] == 1).count() as f64 / members.len() as f64
    };
    (rate(0) - rate(1)).abs()
}

fn brute_eo(preds: &[u8], s: &[u8], y: &[u8]) -> f64 {
    let rate = |g: u8| {
        let pos: Vec<usize> = (0..s.len()).filter(|&i| s[i] == g && y[i] == 1).collect();
        pos.iter().filter(|&&i| preds[i] == 1).count() as f64 / pos.len() as f64
    };
    (rate(0) - rate(1)).abs()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let mut instances = 0;
    while instances < 1000 {
        let n = rng.random_range(4..80);
        let classes = rng.random_range(1..7);
        let s: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let y: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let hard: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let binary: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let groups_ok = s.contains(&0) && s.contains(&1);
        let eo_ok = (0..n).any(|i| s[i] == 0 && y[i] == 1) && (0..n).any(|i| s[i] == 1 && y[i] == 1);
        if !(groups_ok && eo_ok) {
            continue;
        }
        instances += 1;
        let wide: Vec<usize> = binary.iter().map(|&b| b as usize).collect();
        let mut onehot = Array2::zeros((n, classes));
        for (i, &k) in hard.iter().enumerate() {
            onehot[[i, k]] = 1.0;
        }
        let multi = delta_sp_multiclass(&hard, &s).unwrap();
        let ok = delta_sp_binary(&binary, &s).unwrap() == brute_binary(&binary, &s)
            && delta_sp_multiclass(&wide, &s).unwrap() == brute_sp(&wide, &s)
            && multi == brute_sp(&hard, &s)
            && delta_eo(&binary, &s, &y).unwrap() == brute_eo(&binary, &s, &y)
            && delta_sp_soft(&onehot, &s).unwrap() == multi;
        mismatches += (!ok) as usize;
    }
    Outcome {
        id: "2",
        title: "metrics equal brute-force counting",
        passed: mismatches == 0,
        detail: format!("{instances} instances, {mismatches} mismatches"),
    }
}

/// Centred unit vector orthogonal to `basis` (each centred and unit).
fn orthogonal_unit(rng: &mut ChaCha8Rng, n: usize, basis: &[&[f64]]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        for b in basis {
            let d: f64 = v.iter().zip(*b).map(|(a, c)| a * c).sum();
            v.iter_mut().zip(*b).for_each(|(x, c)| *x -= d * c);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut checked, mut violations, mut skipped) = (0, 0, 0);
    while checked < 20_000 {
        let n = rng.random_range(3..12);
        // y plays the community label, x the sensitive attribute, z the prediction
        let y = orthogonal_unit(&mut rng, n, &[]);
        let u = orthogonal_unit(&mut rng, n, &[&y]);
        let w = orthogonal_unit(&mut rng, n, &[&y]);
        let alpha = rng.random_range(0.0..FRAC_PI_2);
        let delta = rng.random_range(0.0..FRAC_PI_2 - alpha);
        let theta = if rng.random::<bool>() { FRAC_PI_2 - delta } else { FRAC_PI_2 + delta };
        let x: Vec<f64> = y.iter().zip(&u).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
        let z: Vec<f64> = y.iter().zip(&w).map(|(a, b)| alpha.cos() * a + alpha.sin() * b).collect();
        let (Ok(rxy), Ok(ryz), Ok(rxz)) = (pearson(&x, &y), pearson(&y, &z), pearson(&x, &z)) else {
            skipped += 1;
            continue;
        };
        let a = ryz.acos();
        let d = (rxy.acos() - FRAC_PI_2).abs();
        let Ok(bound) = correlation_bound(a, d) else {
            skipped += 1;
            continue;
        };
        checked += 1;
        violations += (!bound.contains(rxz, 1e-9)) as usize;
    }
    Outcome {
        id: "3",
        title: "correlation bound holds on constructed triples",
        passed: violations == 0,
        detail: format!("{checked} triples, {violations} violations, {skipped} skipped (angle rounding)"),
    }
}

/// E' ⊇ E, at most `budget` new edges, no self-loops, no duplicates,
/// symmetric adjacency.
fn constraints_hold(before: &Graph, after: &Graph, budget: usize) -> bool {
    after.validate().is_ok()
        && before.edges().all(|(i, j)| after.has_edge(i, j))
        && after.num_edges() - before.num_edges() <= budget
        && after.num_edges() >= before.num_edges()
        && (0..after.num_nodes()).all(|i| {
            let nb = after.neighbors(i);
            !nb.contains(&i)
                && nb.windows(2).all(|w| w[0] < w[1])
                && nb.iter().all(|&j| after.has_edge(j, i))
        })
        && after.edges().collect::<BTreeSet<_>>().len() == after.num_edges()
}

struct EndToEnd {
    outcomes: Vec<Outcome>,
}

fn criteria_4_5_6() -> EndToEnd {
    let started = Instant::now();
    let seeds = DEFAULT_SEEDS;
    let (mut drop, mut dsp, mut f1) = (0.0, [0.0; 3], [0.0; 3]);
    let mut constraint_failures = Vec::new();
    let (mut cross_hi, mut cross_lo) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    for &seed in &seeds {
        let g = generate_sbm(&acceptance_spec(seed)).unwrap();
        let budget = budget_for(&g);
        let cfg = GuideConfig { budget, seed, ..GuideConfig::default() };
        let init = initialize_communities(&g, &cfg.init_config()).unwrap();
        let guided = guide_with_init(&g, &init, &cfg).unwrap();
        let random = baseline_random_add(&g, budget, seed).unwrap();
        let linkpred = baseline_linkpred_add(&g, budget).unwrap();
        for (name, h) in [("guide", &guided.graph), ("random", &random), ("linkpred", &linkpred)] {
            if !constraints_hold(&g, h, budget) {
                constraint_failures.push(format!("{name}@{seed}"));
            }
        }

        let first = guided.loss_trace[0];
        let last = *guided.loss_trace.last().unwrap();
        drop += (first - last) / first / seeds.len() as f64;

        let split = Split::random(g.labels().unwrap(), seed);
        let graphs = [("vanilla", &g), ("random", &random), ("guided", &guided.graph)];
        let reports = evaluate(&graphs, &split, &[seed], &EvalConfig::default()).unwrap();
        for k in 0..3 {
            dsp[k] += reports[k].dsp.mean / seeds.len() as f64;
            f1[k] += reports[k].f1.mean / seeds.len() as f64;
        }
        per_seed.push(format!("{seed}:{:.1}%", 100.0 * (first - last) / first));

        let hi = guide_with_init(&g, &init, &GuideConfig { beta: 10.0, ..cfg }).unwrap();
        let lo = guide_with_init(&g, &init, &GuideConfig { beta: 0.0, ..cfg }).unwrap();
        for (h, tag) in [(&hi.graph, "beta10"), (&lo.graph, "beta0")] {
            if !constraints_hold(&g, h, budget) {
                constraint_failures.push(format!("{tag}@{seed}"));
            }
        }
        cross_hi += hi.overall_cross_group_fraction().unwrap_or(0.0) / seeds.len() as f64;
        cross_lo += lo.overall_cross_group_fraction().unwrap_or(0.0) / seeds.len() as f64;
    }
    let secs = started.elapsed().as_secs_f64();
    EndToEnd {
        outcomes: vec![
            Outcome {
                id: "4a",
                title: "pseudo-task soft dSP drops by at least 30%",
                passed: drop >= 0.30,
                detail: format!("mean relative drop {:.1}% (per seed {})", 100.0 * drop, per_seed.join(" ")),
            },
            Outcome {
                id: "4b",
                title: "GCN dSP guided < vanilla and < random",
                passed: dsp[2] < dsp[0] && dsp[2] < dsp[1],
                detail: format!("dSP vanilla {:.2}%, random {:.2}%, guided {:.2}%", 100.0 * dsp[0], 100.0 * dsp[1], 100.0 * dsp[2]),
            },
            Outcome {
                id: "4c",
                title: "GCN F1 drops by at most 3 points",
                passed: f1[0] - f1[2] <= 0.03,
                detail: format!("F1 vanilla {:.2}%, guided {:.2}%", 100.0 * f1[0], 100.0 * f1[2]),
            },
            Outcome {
                id: "4t",
                title: "end-to-end runs finish within 10 minutes",
                passed: secs < 600.0,
                detail: format!("{secs:.1}s for criteria 4-6 together"),
            },
            Outcome {
                id: "5",
                title: "addition-only budgeted simple symmetric graphs",
                passed: constraint_failures.is_empty(),
                detail: format!("25 runs checked, failures: {constraint_failures:?}"),
            },
            Outcome {
                id: "6",
                title: "cross-group fraction beta=10 > beta=0",
                passed: cross_hi > cross_lo,
                detail: format!("beta=10 {:.3}, beta=0 {:.3}", cross_hi, cross_lo),
            },
        ],
    }
}

fn same_files(a: &Path, b: &Path) -> Result<usize, String> {
    let mut count = 0;
    let mut names: Vec<PathBuf> = fs::read_dir(a).unwrap().flatten().map(|e| e.path()).collect();
    names.sort();
    for pa in names {
        let pb = b.join(pa.file_name().unwrap());
        if pa.is_dir() {
            count += same_files(&pa, &pb)?;
        } else if fs::read(&pa).unwrap() != fs::read(&pb).map_err(|_| format!("missing {}", pb.display()))? {
            return Err(format!("{} differs", pa.display()));
        } else {
            count += 1;
        }
    }
    Ok(count)
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let data = root.join("data");
    cmd_generate(&GenerateArgs {
        n: 120,
        blocks: 2,
        p_in: 0.1,
        p_out: 0.01,
        alignment: 0.95,
        feature_dim: 16,
        feature_signal: 0.5,
        label_noise: 0.1,
        seed: 10,
        out: data.clone(),
    })
    .unwrap();
    let guide_args = |out: &str| GuideArgs {
        data: data.clone(),
        out: root.join(out),
        config: None,
        init_cache: None,
        overrides: GuideOverrides { budget: Some(30), batch: Some(10), seed: Some(10), ae_epochs: Some(200), ..Default::default() },
    };
    let eval_args = |out: &str, guided: &str| EvaluateArgs {
        data: data.clone(),
        graphs: vec![("guided".into(), root.join(guided).join("graph"))],
        seeds: vec![10, 20],
        seed: 10,
        jobs: 1,
        gcn_epochs: 200,
        gcn_hidden: 32,
        gcn_learning_rate: 1e-3,
        out: root.join(out),
    };
    let result = (|| -> Result<usize, String> {
        cmd_guide(&guide_args("g1")).map_err(|e| e.to_string())?;
        cmd_guide(&guide_args("g2")).map_err(|e| e.to_string())?;
        cmd_evaluate(&eval_args("e1", "g1")).map_err(|e| e.to_string())?;
        cmd_evaluate(&eval_args("e2", "g1")).map_err(|e| e.to_string())?;
        Ok(same_files(&root.join("g1"), &root.join("g2"))? + same_files(&root.join("e1"), &root.join("e2"))?)
    })();
    Outcome {
        id: "7",
        title: "guide and evaluate outputs are byte-identical on rerun",
        passed: result.is_ok(),
        detail: match result {
            Ok(n) => format!("{n} files compared"),
            Err(e) => e,
        },
    }
}

fn per_link_seconds(n: usize) -> (f64, usize) {
    // expected degree 20 with a 20:1 ratio of in-block to cross-block density
    let half = n as f64 / 2.0;
    let p_out = 20.0 / (20.0 * (half - 1.0) + half);
    let g = generate_sbm(&SbmSpec { num_nodes: n, p_in: 20.0 * p_out, p_out, seed: 8, ..SbmSpec::default() }).unwrap();
    let mut cfg = GuideConfig { budget: 200, batch_size: 100, seed: 8, ..GuideConfig::default() };
    cfg.autoencoder.epochs = 20;
    let init: CommunityInit = initialize_communities(&g, &cfg.init_config()).unwrap();
    let result = guide_with_init(&g, &init, &cfg).unwrap();
    (result.round_seconds.iter().sum::<f64>() / result.total_added() as f64, g.num_edges())
}

fn criterion_8() -> Outcome {
    let (small, e_small) = per_link_seconds(1000);
    let (large, e_large) = per_link_seconds(5000);
    let limit = 10.0 * 5.0 * small;
    Outcome {
        id: "8",
        title: "per-link time at N=5000 within 10x of N-scaled N=1000 time",
        passed: large <= limit,
        detail: format!(
            "N=1000 ({e_small} edges) {:.3e}s/link, N=5000 ({e_large} edges) {:.3e}s/link, ratio {:.1} (limit 50)",
            small,
            large,
            large / small
        ),
    }
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |id: &str| filter.as_deref().is_none_or(|f| id.starts_with(f));
    let mut outcomes = Vec::new();
    if wanted("1") {
        outcomes.push(criterion_1());
    }
    if wanted("2") {
        outcomes.push(criterion_2());
    }
    if wanted("3") {
        outcomes.push(criterion_3());
    }
    if ["4", "5", "6"].iter().any(|c| wanted(c)) {
        outcomes.extend(criteria_4_5_6().outcomes);
    }
    if wanted("7") {
        outcomes.push(criterion_7());
    }
    if wanted("8") {
        outcomes.push(criterion_8());
    }

    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_UNMET.contains(&o.id);
        let tag = match (o.passed, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known, documented)",
            (false, false) => "FAIL",
        };
        if !o.passed && !known {
            unexpected += 1;
        }
        println!("[{tag}] criterion {} {}: {}", o.id, o.title, o.detail);
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
