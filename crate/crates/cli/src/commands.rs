//! The subcommands. Each one resolves its settings, writes the manifest,
//! then produces its outputs.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use fairlink::community::{init_cache_key, initialize_communities, load_init_cache, save_init_cache, CommunityInit, InitConfig};
use fairlink::io::{load_graph_dir, save_edge_additions, save_graph, EDGES_FILE, FEATURES_FILE, LABELS_FILE, SENSITIVE_FILE};
use fairlink::meta_gradient::{finite_difference_oracle, meta_gradient};
use fairlink::rng::{component_rng, Stream};
use fairlink::sampler::guide_with_init;
use fairlink::{EdgeBatch, Error, Graph};
use fairlink_eval::gcn::{GcnConfig, Split};
use fairlink_eval::{
    baseline_linkpred_add, baseline_random_add, evaluate, format_key_values, format_table, generate_sbm, EvalConfig,
    SbmSpec, DEFAULT_SEEDS,
};
use rand::seq::index;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::manifest::{digest_inputs, RunManifest};
use crate::settings::{GuideOverrides, GuideSettings};

pub const ADDITIONS_FILE: &str = "additions.tsv";
pub const TRACE_FILE: &str = "trace.csv";
pub const GRAPH_DIR: &str = "graph";
pub const REPORT_TABLE_FILE: &str = "report.txt";
pub const REPORT_KV_FILE: &str = "report.kv";
pub const GRADCHECK_FILE: &str = "gradcheck.txt";
pub const TOP_NEGATIVE_FILE: &str = "top_negative.tsv";

const DATA_FILES: [&str; 4] = [EDGES_FILE, FEATURES_FILE, SENSITIVE_FILE, LABELS_FILE];

fn graph_outputs(prefix: &str) -> Vec<String> {
    DATA_FILES.iter().map(|f| format!("{prefix}{f}")).collect()
}

fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Core(Error::Io { path: path.into(), source: e })
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long = "p-in")]
    pub p_in: f64,
    #[arg(long = "p-out")]
    pub p_out: f64,
    #[arg(long, default_value_t = SbmSpec::default().alignment)]
    pub alignment: f64,
    #[arg(long = "feature-dim", default_value_t = SbmSpec::default().feature_dim)]
    pub feature_dim: usize,
    #[arg(long = "feature-signal", default_value_t = SbmSpec::default().feature_signal)]
    pub feature_signal: f64,
    #[arg(long = "label-noise", default_value_t = SbmSpec::default().label_noise)]
    pub label_noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenerateArgs {
    pub fn spec(&self) -> SbmSpec {
        SbmSpec {
            num_nodes: self.n,
            num_blocks: self.blocks,
            p_in: self.p_in,
            p_out: self.p_out,
            alignment: self.alignment,
            feature_dim: self.feature_dim,
            feature_signal: self.feature_signal,
            label_noise: self.label_noise,
            seed: self.seed,
        }
    }
}

pub fn cmd_generate(args: &GenerateArgs) -> CliResult<()> {
    let spec = args.spec();
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    RunManifest {
        command: "generate".into(),
        version: version(),
        config: json!({
            "n": spec.num_nodes,
            "blocks": spec.num_blocks,
            "p_in": spec.p_in,
            "p_out": spec.p_out,
            "alignment": spec.alignment,
            "feature_dim": spec.feature_dim,
            "feature_signal": spec.feature_signal,
            "label_noise": spec.label_noise,
        }),
        inputs: Vec::new(),
        seeds: vec![spec.seed],
        outputs: graph_outputs(""),
    }
    .write(&args.out)?;
    let g = generate_sbm(&spec)?;
    save_graph(&g, &args.out)?;
    println!("generated {} nodes, {} edges in {}", g.num_nodes(), g.num_edges(), args.out.display());
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct GuideArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with settings; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reuse (or create) a cache of the initial communities.
    #[arg(long = "init-cache")]
    pub init_cache: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: GuideOverrides,
}

fn load_or_init(g: &Graph, config: &InitConfig, cache: Option<&Path>) -> CliResult<CommunityInit> {
    let key = init_cache_key(g, config);
    if let Some(path) = cache {
        if let Some(init) = load_init_cache(path, key)? {
            log::info!("initial communities loaded from {}", path.display());
            return Ok(init);
        }
    }
    let init = initialize_communities(g, config)?;
    if let Some(path) = cache {
        save_init_cache(&init, key, path)?;
    }
    Ok(init)
}

pub fn cmd_guide(args: &GuideArgs) -> CliResult<()> {
    let settings = GuideSettings::resolve(args.config.as_deref(), &args.overrides)?;
    let cfg = settings.to_config();
    let g = load_graph_dir(&args.data)?;
    if cfg.budget > g.num_candidates() {
        return Err(Error::Constraint(format!(
            "budget {} exceeds the {} candidate pairs",
            cfg.budget,
            g.num_candidates()
        ))
        .into());
    }
    let mut inputs = vec![args.data.as_path()];
    if let Some(c) = &args.config {
        inputs.push(c.as_path());
    }
    let mut outputs = vec![ADDITIONS_FILE.to_string(), TRACE_FILE.to_string()];
    outputs.extend(graph_outputs(&format!("{GRAPH_DIR}/")));
    RunManifest {
        command: "guide".into(),
        version: version(),
        config: serde_json::to_value(settings).expect("settings serialise"),
        inputs: digest_inputs(&inputs)?,
        seeds: vec![settings.seed],
        outputs,
    }
    .write(&args.out)?;

    let init = load_or_init(&g, &cfg.init_config(), args.init_cache.as_deref())?;
    let result = guide_with_init(&g, &init, &cfg)?;
    println!("iteration 0: soft dsp {:.6}", result.loss_trace[0]);
    for (t, batch) in result.additions.iter().enumerate() {
        println!(
            "iteration {}: +{} links, soft dsp {:.6}",
            t + 1,
            batch.len(),
            result.loss_trace[t + 1]
        );
    }
    if result.tiny_scores > 0 {
        log::warn!("{} positive scores were below epsilon", result.tiny_scores);
    }
    save_edge_additions(&result.additions, &args.out.join(ADDITIONS_FILE))?;
    result.write_trace_csv(&args.out.join(TRACE_FILE))?;
    save_graph(&result.graph, &args.out.join(GRAPH_DIR))?;
    println!("added {} links in {} iteration(s) ({:?})", result.total_added(), result.iterations(), result.status);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Random,
    Linkpred,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn cmd_baseline(args: &BaselineArgs) -> CliResult<()> {
    let g = load_graph_dir(&args.data)?;
    let mut outputs = vec![ADDITIONS_FILE.to_string()];
    outputs.extend(graph_outputs(&format!("{GRAPH_DIR}/")));
    RunManifest {
        command: "baseline".into(),
        version: version(),
        config: json!({
            "method": format!("{:?}", args.method).to_lowercase(),
            "budget": args.budget,
        }),
        inputs: digest_inputs(&[args.data.as_path()])?,
        seeds: vec![args.seed],
        outputs,
    }
    .write(&args.out)?;
    let h = match args.method {
        BaselineMethod::Random => baseline_random_add(&g, args.budget, args.seed)?,
        BaselineMethod::Linkpred => baseline_linkpred_add(&g, args.budget)?,
    };
    let old: BTreeSet<(usize, usize)> = g.edges().collect();
    let added: Vec<(usize, usize)> = h.edges().filter(|e| !old.contains(e)).collect();
    save_edge_additions(&[EdgeBatch::new(0, added)], &args.out.join(ADDITIONS_FILE))?;
    save_graph(&h, &args.out.join(GRAPH_DIR))?;
    println!("added {} links", h.num_edges() - g.num_edges());
    Ok(())
}

fn parse_named_dir(s: &str) -> Result<(String, PathBuf), String> {
    let (name, dir) = s.split_once('=').ok_or_else(|| format!("expected NAME=DIR, got {s:?}"))?;
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(format!("invalid graph name {name:?}"));
    }
    Ok((name.to_string(), PathBuf::from(dir)))
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Original dataset directory, reported as `vanilla`.
    #[arg(long)]
    pub data: PathBuf,
    /// Modified graph as NAME=DIR; repeatable.
    #[arg(long = "graph", value_parser = parse_named_dir)]
    pub graphs: Vec<(String, PathBuf)>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
    pub seeds: Vec<u64>,
    /// Seed of the train/validation/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long = "gcn-epochs", default_value_t = GcnConfig::default().epochs)]
    pub gcn_epochs: usize,
    #[arg(long = "gcn-hidden", default_value_t = GcnConfig::default().hidden)]
    pub gcn_hidden: usize,
    #[arg(long = "gcn-learning-rate", default_value_t = GcnConfig::default().learning_rate)]
    pub gcn_learning_rate: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<()> {
    if args.seeds.is_empty() {
        return Err(CliError::Usage("at least one seed is required".into()));
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let original = load_graph_dir(&args.data)?;
    let mut graphs = vec![("vanilla".to_string(), original)];
    for (name, dir) in &args.graphs {
        if graphs.iter().any(|(n, _)| n == name) {
            return Err(CliError::Usage(format!("duplicate graph name {name}")));
        }
        graphs.push((name.clone(), load_graph_dir(dir)?));
    }
    let labels = graphs[0]
        .1
        .labels()
        .ok_or_else(|| Error::Validation(format!("{} has no labels file", args.data.display())))?;
    let split = Split::random(labels, args.seed);

    let mut inputs: Vec<&Path> = vec![args.data.as_path()];
    inputs.extend(args.graphs.iter().map(|(_, d)| d.as_path()));
    RunManifest {
        command: "evaluate".into(),
        version: version(),
        config: json!({
            "graphs": graphs.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            "split_seed": args.seed,
            "gcn_epochs": args.gcn_epochs,
            "gcn_hidden": args.gcn_hidden,
            "gcn_learning_rate": args.gcn_learning_rate,
            "jobs": args.jobs,
        }),
        inputs: digest_inputs(&inputs)?,
        seeds: args.seeds.clone(),
        outputs: vec![REPORT_TABLE_FILE.into(), REPORT_KV_FILE.into()],
    }
    .write(&args.out)?;

    let config = EvalConfig {
        gcn: GcnConfig {
            hidden: args.gcn_hidden,
            epochs: args.gcn_epochs,
            learning_rate: args.gcn_learning_rate,
            seed: 0,
        },
        jobs: args.jobs,
    };
    let named: Vec<(&str, &Graph)> = graphs.iter().map(|(n, g)| (n.as_str(), g)).collect();
    let reports = evaluate(&named, &split, &args.seeds, &config)?;
    let table = format_table(&reports);
    print!("{table}");
    fs::write(args.out.join(REPORT_TABLE_FILE), &table).map_err(io_err(&args.out))?;
    fs::write(args.out.join(REPORT_KV_FILE), format_key_values(&reports)).map_err(io_err(&args.out))?;
    Ok(())
}

/// Outcome of comparing analytic and finite-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub pairs_checked: usize,
    pub max_abs_error: f64,
    /// Largest `|analytic - fd| / |fd|` over pairs with `fd != 0`.
    pub max_rel_error: f64,
    /// Pair with the largest error relative to its tolerance.
    pub worst: Option<(usize, usize, f64, f64)>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSettings {
    pub alpha: f64,
    pub steps: usize,
    pub pairs: usize,
    pub h: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub seed: u64,
    /// Negates the analytic gradient, to check that the harness can fail.
    pub flip_sign: bool,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self { alpha: 0.1, steps: 10, pairs: 200, h: 1e-5, abs_tol: 1e-6, rel_tol: 1e-4, seed: 0, flip_sign: false }
    }
}

/// Checks the analytic gradient on a seeded sample of candidate pairs.
pub fn gradient_check(g: &Graph, init: &CommunityInit, s: &GradCheckSettings) -> fairlink::Result<GradCheckReport> {
    let grad = meta_gradient(g, init, s.alpha, s.steps)?;
    let available = g.num_candidates();
    let mut picks = index::sample(&mut component_rng(s.seed, Stream::Baseline), available, s.pairs.min(available)).into_vec();
    picks.sort_unstable();
    let mut wanted = picks.iter().peekable();
    let mut report = GradCheckReport { pairs_checked: 0, max_abs_error: 0.0, max_rel_error: 0.0, worst: None, passed: true };
    let mut worst_ratio = -1.0;
    for (pos, (i, j)) in g.candidate_edges().enumerate() {
        if wanted.peek() != Some(&&pos) {
            continue;
        }
        wanted.next();
        let analytic = if s.flip_sign { -grad.get(i, j) } else { grad.get(i, j) };
        let fd = finite_difference_oracle(g, init, s.alpha, s.steps, i, j, s.h)?;
        let err = (analytic - fd).abs();
        report.pairs_checked += 1;
        report.max_abs_error = report.max_abs_error.max(err);
        if fd != 0.0 {
            report.max_rel_error = report.max_rel_error.max(err / fd.abs());
        }
        let ratio = err / f64::max(s.abs_tol, s.rel_tol * fd.abs());
        if ratio > worst_ratio {
            worst_ratio = ratio;
            report.worst = Some((i, j, analytic, fd));
        }
        if ratio > 1.0 {
            report.passed = false;
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Args)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    #[arg(long = "k-steps", default_value_t = 10)]
    pub k_steps: usize,
    #[arg(long, default_value_t = 10)]
    pub communities: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub pairs: usize,
    /// Largest graph accepted.
    #[arg(long = "max-nodes", default_value_t = 50)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub h: f64,
    #[arg(long = "abs-tol", default_value_t = 1e-6)]
    pub abs_tol: f64,
    #[arg(long = "rel-tol", default_value_t = 1e-4)]
    pub rel_tol: f64,
    #[arg(long = "ae-epochs", default_value_t = 1000)]
    pub ae_epochs: usize,
    /// Debug: negate the analytic gradient.
    #[arg(long = "flip-sign")]
    pub flip_sign: bool,
    /// Also write the N most negative candidate gradients.
    #[arg(long = "dump-top")]
    pub dump_top: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_gradcheck(args: &GradCheckArgs) -> CliResult<()> {
    if !(args.h > 0.0) || args.k_steps == 0 || args.communities == 0 || !(0.0..=1.0).contains(&args.alpha) {
        return Err(CliError::Usage("h must be positive, alpha in [0, 1], k-steps and communities at least 1".into()));
    }
    let g = load_graph_dir(&args.data)?;
    if g.num_nodes() > args.max_nodes {
        return Err(Error::Validation(format!(
            "gradient check is limited to {} nodes, graph has {}",
            args.max_nodes,
            g.num_nodes()
        ))
        .into());
    }
    if let Some(out) = &args.out {
        let mut outputs = vec![GRADCHECK_FILE.to_string()];
        if args.dump_top.is_some() {
            outputs.push(TOP_NEGATIVE_FILE.into());
        }
        RunManifest {
            command: "gradcheck".into(),
            version: version(),
            config: json!({
                "alpha": args.alpha, "k_steps": args.k_steps, "communities": args.communities,
                "pairs": args.pairs, "max_nodes": args.max_nodes, "h": args.h,
                "abs_tol": args.abs_tol, "rel_tol": args.rel_tol, "ae_epochs": args.ae_epochs,
                "flip_sign": args.flip_sign, "dump_top": args.dump_top,
            }),
            inputs: digest_inputs(&[args.data.as_path()])?,
            seeds: vec![args.seed],
            outputs,
        }
        .write(out)?;
    }

    let mut init_cfg = fairlink::GuideConfig { num_communities: args.communities, seed: args.seed, ..Default::default() }.init_config();
    init_cfg.autoencoder.epochs = args.ae_epochs;
    let init = initialize_communities(&g, &init_cfg)?;
    let settings = GradCheckSettings {
        alpha: args.alpha,
        steps: args.k_steps,
        pairs: args.pairs,
        h: args.h,
        abs_tol: args.abs_tol,
        rel_tol: args.rel_tol,
        seed: args.seed,
        flip_sign: args.flip_sign,
    };
    let report = gradient_check(&g, &init, &settings)?;
    let mut summary = format!(
        "pairs {}\nmax abs error {:e}\nmax rel error {:e}\n",
        report.pairs_checked, report.max_abs_error, report.max_rel_error
    );
    if let Some((i, j, a, fd)) = report.worst {
        summary.push_str(&format!("worst pair ({i}, {j}): analytic {a:e}, finite difference {fd:e}\n"));
    }
    summary.push_str(if report.passed { "PASS\n" } else { "FAIL\n" });
    print!("{summary}");
    if let Some(out) = &args.out {
        fs::write(out.join(GRADCHECK_FILE), &summary).map_err(io_err(out))?;
        if let Some(k) = args.dump_top {
            let grad = meta_gradient(&g, &init, args.alpha, args.k_steps)?;
            let path = out.join(TOP_NEGATIVE_FILE);
            let mut f = fs::File::create(&path).map_err(io_err(&path))?;
            grad.write_top_negative(&g, k, &mut f).map_err(io_err(&path))?;
            f.flush().map_err(io_err(&path))?;
        }
    }
    if report.passed {
        Ok(())
    } else {
        let (i, j, a, fd) = report.worst.expect("a failing check has a worst pair");
        Err(CliError::CheckFailed(format!("pair ({i}, {j}): analytic {a:e} vs finite difference {fd:e}")))
    }
}
