//! Dataset preparation: citation networks from the public LINQS release
//! and seeded synthetic SBM graphs.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use demograph_core::{
    save_graph, sbm_graph, DenseMatrix, Graph, GraphParts, NodeOrigin, SbmConfig, Splits,
};
use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

/// Environment variable naming a directory with raw dataset files.
pub const ENV_DATA_DIR: &str = "DEMOGRAPH_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetName {
    Cora,
    Citeseer,
    SbmSynthetic,
}

impl FromStr for DatasetName {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cora" => Ok(DatasetName::Cora),
            "citeseer" => Ok(DatasetName::Citeseer),
            "sbm-synthetic" | "sbm" => Ok(DatasetName::SbmSynthetic),
            other => Err(BenchError::Config(format!(
                "unknown dataset {other:?} (expected cora, citeseer or sbm-synthetic)"
            ))),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetName::Cora => "cora",
            DatasetName::Citeseer => "citeseer",
            DatasetName::SbmSynthetic => "sbm-synthetic",
        })
    }
}

/// Labeled-node budget of the standard semi-supervised split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train_per_class: 20,
            val: 500,
            test: 1000,
        }
    }
}

impl DatasetName {
    pub fn raw_files(&self) -> Vec<String> {
        match self {
            DatasetName::SbmSynthetic => vec![],
            name => vec![format!("{name}.content"), format!("{name}.cites")],
        }
    }
}

/// Looks for the raw files directly in `dir` or in `dir/<name>`.
fn locate_raw(name: DatasetName, dir: &Path) -> Result<PathBuf, BenchError> {
    let files = name.raw_files();
    for candidate in [dir.to_path_buf(), dir.join(name.to_string())] {
        if files.iter().all(|f| candidate.join(f).is_file()) {
            return Ok(candidate);
        }
    }
    Err(BenchError::MissingRaw {
        dataset: name.to_string(),
        dir: dir.to_path_buf(),
        expected: files,
    })
}

/// Default raw-data directory: `$DEMOGRAPH_DATA_DIR/<name>` if set, else
/// `data/<name>`.
pub fn default_raw_dir(name: DatasetName) -> PathBuf {
    match std::env::var_os(ENV_DATA_DIR) {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from("data").join(name.to_string()),
    }
}

/// Parses a LINQS `<name>.content` / `<name>.cites` pair. Features are
/// row-normalized to sum to one; citations that mention unknown papers
/// are dropped. The split draws `train_per_class` nodes per class, then
/// `val` and `test` nodes, from a permutation seeded by `split_seed`.
pub fn load_linqs(
    name: DatasetName,
    raw_dir: &Path,
    sizes: SplitSizes,
    split_seed: u64,
) -> Result<Graph, BenchError> {
    let dir = locate_raw(name, raw_dir)?;
    let content_path = dir.join(format!("{name}.content"));
    let content = fs::read_to_string(&content_path).map_err(BenchError::io(&content_path))?;

    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut width = None;
    for (lineno, line) in content.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let parse_err = |message: String| BenchError::Parse {
            path: content_path.clone(),
            line: lineno + 1,
            message,
        };
        if fields.len() < 3 {
            return Err(parse_err("expected id, features and label".into()));
        }
        let feats = &fields[1..fields.len() - 1];
        if *width.get_or_insert(feats.len()) != feats.len() {
            return Err(parse_err(format!(
                "{} features, expected {}",
                feats.len(),
                width.unwrap()
            )));
        }
        let mut row: Vec<f64> = feats
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| parse_err(format!("feature {v:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            return Err(parse_err(format!("duplicate paper id {}", fields[0])));
        }
        rows.push(row);
        raw_labels.push(fields[fields.len() - 1].to_string());
    }
    let n = rows.len();
    let width = width.unwrap_or(0);

    let classes: Vec<&String> = raw_labels
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_of: HashMap<&String, usize> =
        classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|l| class_of[l]).collect();

    let cites_path = dir.join(format!("{name}.cites"));
    let cites = fs::read_to_string(&cites_path).map_err(BenchError::io(&cites_path))?;
    let mut edges = Vec::new();
    let mut dropped = 0usize;
    for (lineno, line) in cites.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            [] => continue,
            [cited, citing] => match (ids.get(*citing), ids.get(*cited)) {
                (Some(&s), Some(&d)) => edges.push((s, d)),
                _ => dropped += 1,
            },
            _ => {
                return Err(BenchError::Parse {
                    path: cites_path.clone(),
                    line: lineno + 1,
                    message: "expected two paper ids".into(),
                })
            }
        }
    }
    if dropped > 0 {
        warn!("{name}: dropped {dropped} citations to unknown papers");
    }

    let splits = standard_splits(&labels, classes.len(), sizes, split_seed)?;
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let graph = Graph::new(GraphParts {
        features: DenseMatrix::from_vec(n, width, data)?,
        labels: labels.into_iter().map(Some).collect(),
        edges,
        splits,
        origin: vec![NodeOrigin::Original; n],
    })?;
    info!(
        "{name}: {} nodes, {} features, {} classes, {} edges",
        graph.num_nodes(),
        graph.num_features(),
        graph.num_classes(),
        graph.edges().len()
    );
    Ok(graph)
}

/// Per-class training nodes, then validation and test nodes, drawn from
/// one seeded permutation. Each split is returned sorted.
pub fn standard_splits(
    labels: &[usize],
    num_classes: usize,
    sizes: SplitSizes,
    seed: u64,
) -> Result<Splits, BenchError> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = vec![0usize; num_classes];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for i in order {
        if taken[labels[i]] < sizes.train_per_class {
            taken[labels[i]] += 1;
            train.push(i);
        } else {
            rest.push(i);
        }
    }
    if taken.iter().any(|&t| t < sizes.train_per_class) {
        return Err(BenchError::Config(format!(
            "some class has fewer than {} nodes",
            sizes.train_per_class
        )));
    }
    if rest.len() < sizes.val + sizes.test {
        return Err(BenchError::Config(format!(
            "{} nodes left after training split, need {}",
            rest.len(),
            sizes.val + sizes.test
        )));
    }
    let mut val = rest[..sizes.val].to_vec();
    let mut test = rest[sizes.val..sizes.val + sizes.test].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Splits { train, val, test })
}

/// Builds the named dataset and writes it as graph JSON to `out`.
pub fn prepare_dataset(
    name: DatasetName,
    raw_dir: Option<&Path>,
    sbm: &SbmConfig,
    out: &Path,
) -> Result<Graph, BenchError> {
    let graph = match name {
        DatasetName::SbmSynthetic => sbm_graph(sbm)?,
        _ => {
            let dir = raw_dir.map_or_else(|| default_raw_dir(name), Path::to_path_buf);
            load_linqs(name, &dir, SplitSizes::default(), 0)?
        }
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(BenchError::io(parent))?;
    }
    save_graph(&graph, out)?;
    Ok(graph)
}
