//! Graph files: `edge_tsv` (`#n=<count>` header, then `i<TAB>j<TAB>w` per undirected
//! edge, 0-based) and a JSON document `{"n": <count>, "edges": [[i, j, w], ...]}`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use probcut_core::graph::{Graph, WeightMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GraphFileError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: diagonal entry ({i}, {i}) with weight {w}")]
    Diagonal { line: usize, i: usize, w: f64 },
    #[error("line {line}: edge ({i}, {j}) has weight {w} but line {first_line} gave {first_w}")]
    Asymmetric { line: usize, i: usize, j: usize, w: f64, first_line: usize, first_w: f64 },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] probcut_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GraphFormat {
    #[default]
    EdgeTsv,
    Json,
}

impl GraphFormat {
    /// `.json` files are JSON, anything else is `edge_tsv`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => GraphFormat::Json,
            _ => GraphFormat::EdgeTsv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

/// Edge list with diagonal and conflicting-duplicate checks; `line_of(k)` names the
/// source line of the `k`-th entry.
fn check_edges(
    n: usize,
    edges: &[(usize, usize, f64)],
    line_of: impl Fn(usize) -> usize,
) -> Result<Vec<(usize, usize, f64)>, GraphFileError> {
    let mut seen: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    let mut out = Vec::with_capacity(edges.len());
    for (k, &(i, j, w)) in edges.iter().enumerate() {
        let line = line_of(k);
        if i >= n || j >= n {
            return Err(GraphFileError::Parse { line, msg: format!("vertex index out of range for n = {n}") });
        }
        if !w.is_finite() || w < 0.0 {
            return Err(GraphFileError::Parse { line, msg: format!("weight {w} must be finite and nonnegative") });
        }
        if i == j {
            if w != 0.0 {
                return Err(GraphFileError::Diagonal { line, i, w });
            }
            continue;
        }
        let key = (i.min(j), i.max(j));
        match seen.get(&key) {
            Some(&(first_w, first_line)) if first_w != w => {
                return Err(GraphFileError::Asymmetric { line, i, j, w, first_line, first_w });
            }
            Some(_) => {}
            None => {
                seen.insert(key, (w, line));
                out.push((i, j, w));
            }
        }
    }
    Ok(out)
}

pub fn parse_edge_tsv(text: &str, mode: WeightMode) -> Result<Graph, GraphFileError> {
    let mut n = None;
    let mut edges = Vec::new();
    let mut lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('#') {
            if let Some(count) = rest.trim().strip_prefix("n=") {
                if n.is_some() {
                    return Err(GraphFileError::Parse { line, msg: "repeated #n= header".into() });
                }
                n = Some(count.trim().parse::<usize>().map_err(|e| GraphFileError::Parse {
                    line,
                    msg: format!("bad vertex count {count:?}: {e}"),
                })?);
            }
            continue;
        }
        if n.is_none() {
            return Err(GraphFileError::Parse { line, msg: "edge before the #n=<count> header".into() });
        }
        let fields: Vec<&str> = body.split('\t').collect();
        if fields.len() != 3 {
            return Err(GraphFileError::Parse { line, msg: format!("expected 3 tab-separated fields, got {}", fields.len()) });
        }
        let idx_field = |s: &str| {
            s.trim().parse::<usize>().map_err(|e| GraphFileError::Parse { line, msg: format!("bad vertex index {s:?}: {e}") })
        };
        let i = idx_field(fields[0])?;
        let j = idx_field(fields[1])?;
        let w = fields[2]
            .trim()
            .parse::<f64>()
            .map_err(|e| GraphFileError::Parse { line, msg: format!("bad weight {:?}: {e}", fields[2]) })?;
        edges.push((i, j, w));
        lines.push(line);
    }
    let n = n.ok_or(GraphFileError::Parse { line: 1, msg: "missing #n=<count> header".into() })?;
    let edges = check_edges(n, &edges, |k| lines[k])?;
    Ok(Graph::from_edges(n, &edges, mode)?)
}

/// `Display` for `f64` is the shortest decimal that round-trips.
pub fn write_edge_tsv(g: &Graph) -> String {
    let mut out = format!("#n={}\n", g.n());
    g.for_each_edge(|i, j, w| {
        let _ = writeln!(out, "{i}\t{j}\t{w}");
    });
    out
}

pub fn parse_json_graph(text: &str, mode: WeightMode) -> Result<Graph, GraphFileError> {
    let doc: JsonGraph = serde_json::from_str(text)?;
    // Entries are reported by position, counted from 1.
    let edges = check_edges(doc.n, &doc.edges, |k| k + 1)?;
    Ok(Graph::from_edges(doc.n, &edges, mode)?)
}

pub fn write_json_graph(g: &Graph) -> String {
    let doc = JsonGraph { n: g.n(), edges: g.edges() };
    let mut s = serde_json::to_string(&doc).expect("graph serializes");
    s.push('\n');
    s
}

pub fn read_graph(path: &Path, format: Option<GraphFormat>, mode: WeightMode) -> Result<Graph, GraphFileError> {
    let text = std::fs::read_to_string(path)?;
    match format.unwrap_or_else(|| GraphFormat::from_path(path)) {
        GraphFormat::EdgeTsv => parse_edge_tsv(&text, mode),
        GraphFormat::Json => parse_json_graph(&text, mode),
    }
}

pub fn format_graph(g: &Graph, format: GraphFormat) -> String {
    match format {
        GraphFormat::EdgeTsv => write_edge_tsv(g),
        GraphFormat::Json => write_json_graph(g),
    }
}

/// One label per line.
pub fn read_labels(path: &Path) -> anyhow::Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse::<usize>().map_err(|e| anyhow::anyhow!("{}: line {}: {e}", path.display(), i + 1)))
        .collect()
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels {
        let _ = writeln!(out, "{l}");
    }
    out
}
