//! Downstream evaluation protocol and its reports.

use std::fmt::Write as _;

use fairlink::metrics::{delta_eo, delta_sp_binary, delta_sp_multiclass};
use fairlink::{Error, Graph, Result};

use crate::gcn::{train_gcn, GcnConfig, Split};
use crate::louvain::louvain;
use crate::metrics::{f1_score, roc_auc, Summary};

pub const DEFAULT_SEEDS: [u64; 5] = [10, 20, 30, 40, 50];

/// Scores of one graph for one seed. `auc` is NaN when undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedScores {
    pub seed: u64,
    pub f1: f64,
    pub auc: f64,
    pub dsp: f64,
    pub deo: f64,
    pub dsp_cd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub name: String,
    pub per_seed: Vec<SeedScores>,
    pub f1: Summary,
    pub auc: Summary,
    pub dsp: Summary,
    pub deo: Summary,
    pub dsp_cd: Summary,
}

impl EvalReport {
    fn from_scores(name: &str, per_seed: Vec<SeedScores>) -> Self {
        let col = |f: fn(&SeedScores) -> f64| Summary::of(&per_seed.iter().map(f).collect::<Vec<_>>());
        Self {
            name: name.to_string(),
            f1: col(|s| s.f1),
            auc: col(|s| s.auc),
            dsp: col(|s| s.dsp),
            deo: col(|s| s.deo),
            dsp_cd: col(|s| s.dsp_cd),
            per_seed,
        }
    }

    fn rows(&self) -> [(&'static str, Summary); 5] {
        [
            ("f1", self.f1),
            ("auc", self.auc),
            ("dsp", self.dsp),
            ("deo", self.deo),
            ("dsp_cd", self.dsp_cd),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub gcn: GcnConfig,
    /// Worker threads over seeds.
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { gcn: GcnConfig::default(), jobs: 1 }
    }
}

fn score_seed(g: &Graph, labels: &[Option<u32>], split: &Split, seed: u64, config: &EvalConfig) -> Result<SeedScores> {
    let out = train_gcn(g, labels, split, &GcnConfig { seed, ..config.gcn })?;
    let truth: Vec<u8> = split.test.iter().map(|&v| labels[v].unwrap_or(0) as u8).collect();
    let s: Vec<u8> = split.test.iter().map(|&v| g.sensitive()[v]).collect();
    let auc = match roc_auc(&out.probabilities, &truth) {
        Ok(a) => a,
        Err(Error::UndefinedMetric(m)) => {
            log::warn!("seed {seed}: {m}");
            f64::NAN
        }
        Err(e) => return Err(e),
    };
    let communities = louvain(g, seed);
    Ok(SeedScores {
        seed,
        f1: f1_score(&out.predictions, &truth)?,
        auc,
        dsp: delta_sp_binary(&out.predictions, &s)?,
        deo: delta_eo(&out.predictions, &s, &truth)?,
        dsp_cd: delta_sp_multiclass(&communities, g.sensitive())?,
    })
}

/// Runs GCN classification and Louvain detection on every graph for every
/// seed. Labels and sensitive attributes come from the first graph.
pub fn evaluate(
    graphs: &[(&str, &Graph)],
    split: &Split,
    seeds: &[u64],
    config: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let Some(&(_, reference)) = graphs.first() else {
        return Ok(Vec::new());
    };
    let labels = reference
        .labels()
        .ok_or_else(|| Error::Validation("the reference graph has no labels".into()))?;
    for &(name, g) in graphs {
        if g.num_nodes() != reference.num_nodes() {
            return Err(Error::Validation(format!(
                "graph {name} has {} nodes, expected {}",
                g.num_nodes(),
                reference.num_nodes()
            )));
        }
        if g.sensitive() != reference.sensitive() {
            return Err(Error::Validation(format!("graph {name} has different sensitive attributes")));
        }
    }

    let jobs: Vec<(usize, u64)> = (0..graphs.len()).flat_map(|gi| seeds.iter().map(move |&s| (gi, s))).collect();
    let run = |&(gi, seed): &(usize, u64)| score_seed(graphs[gi].1, labels, split, seed, config);
    let results: Vec<Result<SeedScores>> = if config.jobs <= 1 {
        jobs.iter().map(run).collect()
    } else {
        let chunk = jobs.len().div_ceil(config.jobs).max(1);
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(run).collect::<Vec<_>>()))
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("evaluation worker panicked")).collect()
        })
    };

    let mut results = results.into_iter();
    graphs
        .iter()
        .map(|&(name, _)| {
            let scores = results.by_ref().take(seeds.len()).collect::<Result<Vec<_>>>()?;
            Ok(EvalReport::from_scores(name, scores))
        })
        .collect()
}

fn percent(s: Summary) -> String {
    if s.mean.is_nan() {
        "undefined".to_string()
    } else {
        format!("{:.1} ± {:.1}", 100.0 * s.mean, 100.0 * s.std)
    }
}

/// Side-by-side table in percent, one column per graph.
pub fn format_table(reports: &[EvalReport]) -> String {
    const LABELS: [&str; 5] = ["F1 (%)", "AUC (%)", "ΔSP (%)", "ΔEO (%)", "ΔSP_cd (%)"];
    let mut cells: Vec<Vec<String>> = vec![std::iter::once("metric".to_string())
        .chain(reports.iter().map(|r| r.name.clone()))
        .collect()];
    for (row, label) in LABELS.iter().enumerate() {
        let mut line = vec![label.to_string()];
        line.extend(reports.iter().map(|r| percent(r.rows()[row].1)));
        cells.push(line);
    }
    let width = |c: usize| cells.iter().map(|l| l[c].chars().count()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..=reports.len()).map(width).collect();
    let mut out = String::new();
    for line in &cells {
        let padded: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell}{}", " ".repeat(w - cell.chars().count())))
            .collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).unwrap();
    }
    out
}

/// `name.metric.mean=value` lines, plus one line per seed, full precision.
pub fn format_key_values(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    for r in reports {
        for (metric, s) in r.rows() {
            writeln!(out, "{}.{metric}.mean={:?}", r.name, s.mean).unwrap();
            writeln!(out, "{}.{metric}.std={:?}", r.name, s.std).unwrap();
        }
        for s in &r.per_seed {
            writeln!(
                out,
                "{}.seed{}={:?},{:?},{:?},{:?},{:?}",
                r.name, s.seed, s.f1, s.auc, s.dsp, s.deo, s.dsp_cd
            )
            .unwrap();
        }
    }
    out
}
