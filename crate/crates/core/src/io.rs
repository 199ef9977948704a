//! Plain-text dataset formats.
//!
//! * edge list: one `i<TAB>j` pair per line, `#` starts a comment
//! * features: CSV, row `r` holds node `r`, optional header line
//! * sensitive attributes: one `0`/`1` per line
//! * labels: one integer per line, `-1` for unlabeled nodes
//! * addition log: `# iteration k` headers followed by `i<TAB>j` lines

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{EdgeBatch, Graph};

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const SENSITIVE_FILE: &str = "sensitive.txt";
pub const LABELS_FILE: &str = "labels.txt";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Meaningful lines with their 1-based line numbers; comments and blank
/// lines are skipped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(no, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((no + 1, line))
    })
}

fn parse_pair(path: &Path, no: usize, line: &str) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(parse_err(path, no, format!("expected two node ids, got {line:?}")));
    };
    let a = a
        .parse()
        .map_err(|_| parse_err(path, no, format!("invalid node id {a:?}")))?;
    let b = b
        .parse()
        .map_err(|_| parse_err(path, no, format!("invalid node id {b:?}")))?;
    Ok((a, b))
}

/// Reads an edge list, checking every id against `num_nodes`.
pub fn load_edge_list(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut pairs = Vec::new();
    for (no, line) in content_lines(&text) {
        let (a, b) = parse_pair(path, no, line)?;
        for node in [a, b] {
            if node >= num_nodes {
                return Err(Error::IndexOutOfRange { node, num_nodes });
            }
        }
        pairs.push((a, b));
    }
    Ok(pairs)
}

pub fn load_features(path: &Path) -> Result<Array2<f64>> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, (no, line)) in content_lines(&text).enumerate() {
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            // a non-numeric first line is a header
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(parse_err(path, no, format!("invalid feature value: {e}"))),
        }
        let width = rows[0].len();
        if rows.last().map(Vec::len) != Some(width) {
            return Err(parse_err(
                path,
                no,
                format!("expected {width} columns, got {}", rows.last().unwrap().len()),
            ));
        }
    }
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((n, m), flat).expect("rectangular rows"))
}

pub fn load_sensitive(path: &Path) -> Result<Vec<u8>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(no, line)| match line {
            "0" => Ok(0),
            "1" => Ok(1),
            other => match other.parse::<i64>() {
                Ok(v) => Err(Error::Domain(format!(
                    "{}:{no}: sensitive value {v} is not 0 or 1",
                    path.display()
                ))),
                Err(_) => Err(parse_err(path, no, format!("invalid sensitive value {other:?}"))),
            },
        })
        .collect()
}

pub fn load_labels(path: &Path) -> Result<Vec<Option<u32>>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(no, line)| {
            let v: i64 = line
                .parse()
                .map_err(|_| parse_err(path, no, format!("invalid label {line:?}")))?;
            match v {
                -1 => Ok(None),
                v if (0..=u32::MAX as i64).contains(&v) => Ok(Some(v as u32)),
                v => Err(Error::Domain(format!(
                    "{}:{no}: label {v} is neither -1 nor a non-negative integer",
                    path.display()
                ))),
            }
        })
        .collect()
}

/// Loads a graph from its four sources. The node count is the number of
/// entries in the sensitive-attribute file.
pub fn load_graph(
    edges: &Path,
    features: &Path,
    sensitive: &Path,
    labels: Option<&Path>,
) -> Result<Graph> {
    let s = load_sensitive(sensitive)?;
    let n = s.len();
    let x = load_features(features)?;
    if x.nrows() != n {
        return Err(Error::Validation(format!(
            "{} has {} rows but {} lists {n} nodes",
            features.display(),
            x.nrows(),
            sensitive.display()
        )));
    }
    let pairs = load_edge_list(edges, n)?;
    let g = Graph::new(n, pairs, x, s)?;
    match labels {
        Some(path) => g.with_labels(load_labels(path)?),
        None => Ok(g),
    }
}

/// Loads a dataset directory written by [`save_graph`]. The labels file is
/// optional.
pub fn load_graph_dir(dir: &Path) -> Result<Graph> {
    let labels = dir.join(LABELS_FILE);
    load_graph(
        &dir.join(EDGES_FILE),
        &dir.join(FEATURES_FILE),
        &dir.join(SENSITIVE_FILE),
        labels.exists().then_some(labels.as_path()),
    )
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, mut w: BufWriter<fs::File>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn save_edge_list(g: &Graph, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# {} nodes, {} edges", g.num_nodes(), g.num_edges()).map_err(io)?;
    for (i, j) in g.edges() {
        writeln!(w, "{i}\t{j}").map_err(io)?;
    }
    finish(path, w)
}

/// Writes the edge list, features, sensitive attributes and (when present)
/// labels into `dir` using the standard file names.
pub fn save_graph(g: &Graph, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_edge_list(g, &dir.join(EDGES_FILE))?;

    let path = dir.join(FEATURES_FILE);
    let mut w = create(&path)?;
    let io = |e| Error::io(&path, e);
    let m = g.features().ncols();
    let header: Vec<String> = (0..m).map(|c| format!("x{c}")).collect();
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in g.features().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", cells.join(",")).map_err(io)?;
    }
    finish(&path, w)?;

    let path = dir.join(SENSITIVE_FILE);
    let mut w = create(&path)?;
    for s in g.sensitive() {
        writeln!(w, "{s}").map_err(|e| Error::io(&path, e))?;
    }
    finish(&path, w)?;

    if let Some(labels) = g.labels() {
        let path = dir.join(LABELS_FILE);
        let mut w = create(&path)?;
        for l in labels {
            let v = l.map_or(-1, i64::from);
            writeln!(w, "{v}").map_err(|e| Error::io(&path, e))?;
        }
        finish(&path, w)?;
    }
    Ok(())
}

pub fn save_edge_additions(batches: &[EdgeBatch], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    for b in batches {
        writeln!(w, "# iteration {}", b.iteration).map_err(io)?;
        for &(i, j) in &b.pairs {
            writeln!(w, "{i}\t{j}").map_err(io)?;
        }
    }
    finish(path, w)
}

pub fn load_edge_additions(path: &Path) -> Result<Vec<EdgeBatch>> {
    let text = read(path)?;
    let mut batches: Vec<EdgeBatch> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(k) = rest.strip_prefix("iteration") {
                let k = k
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(path, no, format!("bad iteration header {line:?}")))?;
                batches.push(EdgeBatch::new(k, Vec::new()));
            }
            continue;
        }
        let pair = parse_pair(path, no, line)?;
        match batches.last_mut() {
            Some(b) => b.pairs.push(pair),
            None => return Err(parse_err(path, no, "edge before first iteration header")),
        }
    }
    Ok(batches)
}

/// Rewrites an edge list with arbitrary string ids into dense ids
/// `0..N-1`, assigned in order of first appearance. The mapping is written
/// as `dense<TAB>external` lines. Returns the mapping.
pub fn remap_edge_list(input: &Path, output: &Path, mapping: &Path) -> Result<Vec<String>> {
    let text = read(input)?;
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names: Vec<String> = Vec::new();
    let mut pairs = Vec::new();
    for (no, line) in content_lines(&text) {
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(input, no, format!("expected two node ids, got {line:?}")));
        };
        let mut id = |name: &str| {
            *ids.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let pair = (id(a), id(b));
        pairs.push(pair);
    }
    let mut w = create(output)?;
    for (a, b) in pairs {
        writeln!(w, "{a}\t{b}").map_err(|e| Error::io(output, e))?;
    }
    finish(output, w)?;
    let mut w = create(mapping)?;
    for (dense, name) in names.iter().enumerate() {
        writeln!(w, "{dense}\t{name}").map_err(|e| Error::io(mapping, e))?;
    }
    finish(mapping, w)?;
    Ok(names)
}
