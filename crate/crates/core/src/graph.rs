//! In-memory graphs with node features, labels and splits, plus the
//! symmetric normalized adjacency consumed by the GNN layers.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, GraphError> {
        if data.len() != rows * cols {
            return Err(GraphError::Schema(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self, GraphError> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(GraphError::Schema(format!(
                    "feature row {i} has {} values, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Stacks `other` below `self`. Column counts must agree.
    pub fn vstack(&self, other: &DenseMatrix) -> Result<DenseMatrix, GraphError> {
        if self.cols != other.cols && self.rows > 0 && other.rows > 0 {
            return Err(GraphError::Schema(format!(
                "cannot stack {} columns onto {}",
                other.cols, self.cols
            )));
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeOrigin {
    Original,
    Concept,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn iter_all(&self) -> impl Iterator<Item = usize> + '_ {
        self.train
            .iter()
            .chain(self.val.iter())
            .chain(self.test.iter())
            .copied()
    }
}

/// Raw pieces of a graph prior to validation.
#[derive(Debug, Clone, Default)]
pub struct GraphParts {
    pub features: DenseMatrix,
    pub labels: Vec<Option<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub splits: Splits,
    pub origin: Vec<NodeOrigin>,
}

/// A validated graph. Node ids are dense `0..num_nodes`; edges are stored
/// as given (directed) and symmetrized on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    features: DenseMatrix,
    labels: Vec<Option<usize>>,
    edges: Vec<(usize, usize)>,
    splits: Splits,
    origin: Vec<NodeOrigin>,
}

impl Graph {
    pub fn new(parts: GraphParts) -> Result<Self, GraphError> {
        let n = parts.features.rows();
        if parts.labels.len() != n {
            return Err(GraphError::Schema(format!(
                "{} labels for {n} nodes",
                parts.labels.len()
            )));
        }
        if parts.origin.len() != n {
            return Err(GraphError::Schema(format!(
                "{} origin tags for {n} nodes",
                parts.origin.len()
            )));
        }
        if let Some(v) = parts.features.data().iter().find(|v| !v.is_finite()) {
            return Err(GraphError::Schema(format!("non-finite feature value {v}")));
        }
        for &(src, dst) in &parts.edges {
            if src >= n || dst >= n {
                return Err(GraphError::EndpointOutOfRange {
                    src,
                    dst,
                    num_nodes: n,
                });
            }
        }
        let mut seen = BTreeSet::new();
        for idx in parts.splits.iter_all() {
            if idx >= n {
                return Err(GraphError::Schema(format!(
                    "split member {idx} out of range for {n} nodes"
                )));
            }
            if !seen.insert(idx) {
                return Err(GraphError::Schema(format!(
                    "node {idx} appears in more than one split"
                )));
            }
            if parts.labels[idx].is_none() {
                return Err(GraphError::Schema(format!(
                    "split member {idx} has no label"
                )));
            }
            if parts.origin[idx] == NodeOrigin::Concept {
                return Err(GraphError::Schema(format!(
                    "concept node {idx} cannot belong to a split"
                )));
            }
        }
        for (i, (&o, l)) in parts.origin.iter().zip(&parts.labels).enumerate() {
            if o == NodeOrigin::Concept && l.is_some() {
                return Err(GraphError::Schema(format!(
                    "concept node {i} must not carry a label"
                )));
            }
        }
        Ok(Self {
            features: parts.features,
            labels: parts.labels,
            edges: parts.edges,
            splits: parts.splits,
            origin: parts.origin,
        })
    }

    pub fn into_parts(self) -> GraphParts {
        GraphParts {
            features: self.features,
            labels: self.labels,
            edges: self.edges,
            splits: self.splits,
            origin: self.origin,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    /// One more than the largest label present, or 0 without labels.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn origin(&self) -> &[NodeOrigin] {
        &self.origin
    }

    pub fn original_nodes(&self) -> Vec<usize> {
        self.origin
            .iter()
            .enumerate()
            .filter(|(_, o)| **o == NodeOrigin::Original)
            .map(|(i, _)| i)
            .collect()
    }

    /// Replaces the feature matrix with i.i.d. N(0, 1/dim) values. Used
    /// when a dataset ships without features.
    pub fn with_random_features(mut self, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, (1.0 / dim.max(1) as f64).sqrt()).expect("valid std");
        let n = self.num_nodes();
        let data = (0..n * dim).map(|_| normal.sample(&mut rng)).collect();
        self.features = DenseMatrix {
            rows: n,
            cols: dim,
            data,
        };
        self
    }

    /// Undirected edge set: each stored edge in both directions,
    /// deduplicated and sorted. Self-loops appear once.
    pub fn symmetrized_edges(&self) -> Vec<(usize, usize)> {
        let mut set = BTreeSet::new();
        for &(s, d) in &self.edges {
            set.insert((s, d));
            set.insert((d, s));
        }
        set.into_iter().collect()
    }

    /// Symmetrized edges without self-loops, plus one self-loop per node.
    /// This is the message-passing neighbourhood used by GAT.
    pub fn edges_with_self_loops(&self) -> Vec<(usize, usize)> {
        let mut set: BTreeSet<(usize, usize)> = self
            .symmetrized_edges()
            .into_iter()
            .filter(|(s, d)| s != d)
            .collect();
        for i in 0..self.num_nodes() {
            set.insert((i, i));
        }
        set.into_iter().collect()
    }
}

/// Square sparse matrix in CSR layout, at most one value per (row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseAdjacency {
    /// Builds from `(row, col, value)` triplets; duplicates are rejected.
    pub fn from_triplets(
        n: usize,
        mut entries: Vec<(usize, usize, f64)>,
    ) -> Result<Self, GraphError> {
        entries.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if r >= n || c >= n {
                return Err(GraphError::Schema(format!(
                    "adjacency entry ({r},{c}) out of range for {n} nodes"
                )));
            }
            if !v.is_finite() {
                return Err(GraphError::Schema(format!(
                    "non-finite adjacency value at ({r},{c})"
                )));
            }
            if prev == Some((r, c)) {
                return Err(GraphError::Schema(format!(
                    "duplicate adjacency entry ({r},{c})"
                )));
            }
            prev = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.row(i).find(|(c, _)| *c == j).map(|(_, v)| v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` over the symmetrized edge set, where `A` is
/// binary and any self-loops in the input are subsumed by `I`.
pub fn normalized_adjacency(graph: &Graph) -> SparseAdjacency {
    let n = graph.num_nodes();
    let pattern = graph.edges_with_self_loops();
    let mut degree = vec![0usize; n];
    for &(s, _) in &pattern {
        degree[s] += 1;
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let entries = pattern
        .into_iter()
        .map(|(i, j)| (i, j, inv_sqrt[i] * inv_sqrt[j]))
        .collect();
    SparseAdjacency::from_triplets(n, entries).expect("pattern is deduplicated and in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// A single JSON document.
    Json,
    /// A directory holding `edges.txt`, `features.csv`, and optionally
    /// `labels.csv` and `splits.json`.
    EdgeList,
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphDoc {
    num_nodes: usize,
    #[serde(default)]
    features: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    labels: Option<Vec<Option<usize>>>,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
    #[serde(default)]
    splits: Splits,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<Vec<NodeOrigin>>,
}

pub fn load_graph(path: &Path, format: GraphFormat) -> Result<Graph, GraphError> {
    match format {
        GraphFormat::Json => load_json(path),
        GraphFormat::EdgeList => load_edge_list(path),
    }
}

fn read(path: &Path) -> Result<String, GraphError> {
    fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn graph_from_json_str(raw: &str, path: &Path) -> Result<Graph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(raw).map_err(|e| GraphError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let n = doc.num_nodes;
    let features = match doc.features {
        Some(rows) => {
            if rows.len() != n {
                return Err(GraphError::Schema(format!(
                    "{} feature rows for {n} nodes",
                    rows.len()
                )));
            }
            let cols = rows.first().map_or(0, Vec::len);
            DenseMatrix::from_rows(&rows, cols)?
        }
        None => DenseMatrix::zeros(n, 0),
    };
    Graph::new(GraphParts {
        features,
        labels: doc.labels.unwrap_or_else(|| vec![None; n]),
        edges: doc.edges.into_iter().map(|[s, d]| (s, d)).collect(),
        splits: doc.splits,
        origin: doc.origin.unwrap_or_else(|| vec![NodeOrigin::Original; n]),
    })
}

fn load_json(path: &Path) -> Result<Graph, GraphError> {
    graph_from_json_str(&read(path)?, path)
}

pub fn graph_to_json_string(graph: &Graph) -> String {
    let all_original = graph.origin.iter().all(|o| *o == NodeOrigin::Original);
    let doc = GraphDoc {
        num_nodes: graph.num_nodes(),
        features: Some(
            (0..graph.num_nodes())
                .map(|i| graph.features.row(i).to_vec())
                .collect(),
        ),
        labels: Some(graph.labels.clone()),
        edges: graph.edges.iter().map(|&(s, d)| [s, d]).collect(),
        splits: graph.splits.clone(),
        origin: (!all_original).then(|| graph.origin.clone()),
    };
    serde_json::to_string(&doc).expect("graph serializes")
}

pub fn save_graph(graph: &Graph, path: &Path) -> Result<(), GraphError> {
    fs::write(path, graph_to_json_string(graph)).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn open_lines(
    path: &Path,
) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>, GraphError> {
    let file = fs::File::open(path).map_err(|source| GraphError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufReader::new(file)
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l)))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn load_edge_list(dir: &Path) -> Result<Graph, GraphError> {
    let features_path = dir.join("features.csv");
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in open_lines(&features_path)? {
        let line = line.map_err(|e| parse_err(&features_path, lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let idx: usize = cells
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| parse_err(&features_path, lineno, "expected node index in column 0"))?;
        let values = cells
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(&features_path, lineno, e.to_string()))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(GraphError::Schema(format!(
                    "{}:{lineno}: {} feature values, expected {d}",
                    features_path.display(),
                    values.len()
                )))
            }
            _ => {}
        }
        rows.push((idx, values));
    }
    let n = rows.len();
    let dim = dim.unwrap_or(0);
    let mut ordered = vec![None; n];
    for (idx, values) in rows {
        if idx >= n || ordered[idx].is_some() {
            return Err(GraphError::Schema(format!(
                "feature rows must cover node ids 0..{n} exactly once (got {idx})"
            )));
        }
        ordered[idx] = Some(values);
    }
    let ordered: Vec<Vec<f64>> = ordered.into_iter().map(|r| r.expect("checked")).collect();
    let features = DenseMatrix::from_rows(&ordered, dim)?;

    let edges_path = dir.join("edges.txt");
    let mut edges = Vec::new();
    for (lineno, line) in open_lines(&edges_path)? {
        let line = line.map_err(|e| parse_err(&edges_path, lineno, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut it = t.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(&edges_path, lineno, "expected `src dst`"));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| parse_err(&edges_path, lineno, e.to_string()))
        };
        edges.push((parse(a)?, parse(b)?));
    }

    let mut labels = vec![None; n];
    let labels_path = dir.join("labels.csv");
    if labels_path.exists() {
        for (lineno, line) in open_lines(&labels_path)? {
            let line = line.map_err(|e| parse_err(&labels_path, lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            let [idx, label] = cells[..] else {
                return Err(parse_err(&labels_path, lineno, "expected `node,label`"));
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(&labels_path, lineno, "bad node index"))?;
            if idx >= n {
                return Err(GraphError::Schema(format!(
                    "label row for node {idx} out of range for {n} nodes"
                )));
            }
            labels[idx] = Some(
                label
                    .parse()
                    .map_err(|_| parse_err(&labels_path, lineno, "bad class index"))?,
            );
        }
    }

    let splits_path = dir.join("splits.json");
    let splits = if splits_path.exists() {
        serde_json::from_str(&read(&splits_path)?).map_err(|e| GraphError::Parse {
            path: splits_path.clone(),
            line: e.line(),
            message: e.to_string(),
        })?
    } else {
        Splits::default()
    };

    Graph::new(GraphParts {
        features,
        labels,
        edges,
        splits,
        origin: vec![NodeOrigin::Original; n],
    })
}

/// Writes the edge-list layout understood by [`GraphFormat::EdgeList`].
pub fn save_edge_list(graph: &Graph, dir: &Path) -> Result<(), GraphError> {
    let io = |path: PathBuf| move |source| GraphError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let mut edges = String::new();
    for (s, d) in graph.edges() {
        edges.push_str(&format!("{s} {d}\n"));
    }
    fs::write(dir.join("edges.txt"), edges).map_err(io(dir.join("edges.txt")))?;
    let mut feats = String::new();
    for i in 0..graph.num_nodes() {
        feats.push_str(&i.to_string());
        for v in graph.features().row(i) {
            feats.push(',');
            feats.push_str(&v.to_string());
        }
        feats.push('\n');
    }
    fs::write(dir.join("features.csv"), feats).map_err(io(dir.join("features.csv")))?;
    let mut labels = String::new();
    for (i, l) in graph.labels().iter().enumerate() {
        if let Some(l) = l {
            labels.push_str(&format!("{i},{l}\n"));
        }
    }
    fs::write(dir.join("labels.csv"), labels).map_err(io(dir.join("labels.csv")))?;
    let splits = serde_json::to_string(graph.splits()).expect("splits serialize");
    fs::write(dir.join("splits.json"), splits).map_err(io(dir.join("splits.json")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        Graph::new(GraphParts {
            features: DenseMatrix::zeros(n, 2),
            labels: vec![None; n],
            edges,
            splits: Splits::default(),
            origin: vec![NodeOrigin::Original; n],
        })
        .unwrap()
    }

    #[test]
    fn single_node_adjacency_is_identity() {
        let a = normalized_adjacency(&graph(1, vec![]));
        assert_eq!(a.entries().collect::<Vec<_>>(), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn two_node_adjacency_is_all_half() {
        let a = normalized_adjacency(&graph(2, vec![(0, 1)]));
        assert_eq!(a.nnz(), 4);
        for (_, _, v) in a.entries() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn path_graph_entry() {
        let a = normalized_adjacency(&graph(3, vec![(0, 1), (1, 2)]));
        let expected = 1.0 / (2.0f64 * 3.0).sqrt();
        assert!((a.get(0, 1).unwrap() - expected).abs() < 1e-15);
        assert!(a.get(0, 2).is_none());
        assert!((a.get(1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn existing_self_loop_is_not_doubled() {
        let a = normalized_adjacency(&graph(1, vec![(0, 0)]));
        assert_eq!(a.get(0, 0), Some(1.0));
    }

    #[test]
    fn endpoint_out_of_range() {
        let err = Graph::new(GraphParts {
            features: DenseMatrix::zeros(3, 1),
            labels: vec![None; 3],
            edges: vec![(0, 5)],
            splits: Splits::default(),
            origin: vec![NodeOrigin::Original; 3],
        })
        .unwrap_err();
        assert!(err.to_string().contains("endpoint out of range"));
    }

    #[test]
    fn split_invariants() {
        let base = || GraphParts {
            features: DenseMatrix::zeros(3, 1),
            labels: vec![Some(0), Some(1), None],
            edges: vec![],
            splits: Splits::default(),
            origin: vec![NodeOrigin::Original; 3],
        };
        let mut p = base();
        p.splits.train = vec![0];
        p.splits.test = vec![0];
        assert!(Graph::new(p).is_err());
        let mut p = base();
        p.splits.val = vec![2];
        assert!(Graph::new(p).is_err());
        let mut p = base();
        p.origin[1] = NodeOrigin::Concept;
        assert!(Graph::new(p).is_err());
        let mut p = base();
        p.splits.train = vec![0, 1];
        assert!(Graph::new(p).is_ok());
    }

    #[test]
    fn json_minimal_document() {
        let g = graph_from_json_str(
            r#"{"num_nodes":2,"features":[[1,0],[0,1]],"labels":[0,1],"edges":[[0,1]],"splits":{"train":[0],"val":[],"test":[1]}}"#,
            Path::new("mem"),
        )
        .unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.num_features(), 2);
        assert_eq!(g.num_classes(), 2);
    }

    #[test]
    fn json_ragged_features_is_schema_error() {
        let err = graph_from_json_str(
            r#"{"num_nodes":2,"features":[[1,0],[0]],"edges":[]}"#,
            Path::new("mem"),
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::Schema(_)));
    }

    #[test]
    fn json_syntax_error_names_line() {
        let err =
            graph_from_json_str("{\n\"num_nodes\": 2,\n oops }", Path::new("mem")).unwrap_err();
        match err {
            GraphError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
