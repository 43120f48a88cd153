//! Repeated-seed experiment runs and their reports.

use std::fs;
use std::path::{Path, PathBuf};

use demograph_core::prompt::parse_granularity;
use demograph_core::{
    load_graph, load_kg, AnchorSampling, Graph, GraphFormat, KnowledgeGraph, MergeConfig, MergeMode,
};
use demograph_gnn::{train, write_metrics_csv, GnnError, TrainConfig, TrainOutcome};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::metrics::{compute_metrics, mean_std};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeSettings {
    pub edges_per_concept: usize,
    pub kgs_per_step: usize,
    pub mode: MergeMode,
    pub anchor_sampling: AnchorSampling,
}

impl Default for MergeSettings {
    fn default() -> Self {
        Self {
            edges_per_concept: 3,
            kgs_per_step: 1,
            mode: MergeMode::Dynamic,
            anchor_sampling: AnchorSampling::PerConcept,
        }
    }
}

impl MergeSettings {
    pub fn to_config(&self, seed: u64, feature_dim: usize) -> MergeConfig {
        MergeConfig {
            edges_per_concept: self.edges_per_concept,
            kgs_per_step: self.kgs_per_step,
            mode: self.mode,
            seed,
            concept_feature_dim: feature_dim,
            anchor_sampling: self.anchor_sampling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Graph JSON file, or an edge-list directory.
    pub dataset: PathBuf,
    /// Width of seeded random features for graphs shipped without any.
    pub random_features: Option<usize>,
    /// Merge a knowledge graph into the training graph.
    pub augment: bool,
    /// Directory of KG files named `<granularity>[.ift].jsonl`.
    pub kg_dir: Option<PathBuf>,
    pub granularity: String,
    pub ift: bool,
    /// Use this KG file instead of looking one up in `kg_dir`.
    pub kg_override: Option<PathBuf>,
    /// KG built for another dataset, used by the biased-KG suite.
    pub foreign_kg: Option<PathBuf>,
    pub merge: MergeSettings,
    pub train: TrainConfig,
    /// Repeated runs with seeds `seed, seed + 1, ...`.
    pub runs: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            dataset: PathBuf::new(),
            random_features: None,
            augment: false,
            kg_dir: None,
            granularity: "s0".into(),
            ift: true,
            kg_override: None,
            foreign_kg: None,
            merge: MergeSettings::default(),
            train: TrainConfig::default(),
            runs: 5,
            seed: 0,
            output_dir: PathBuf::from("runs"),
        }
    }
}

pub fn kg_file_name(granularity: &str, ift: bool) -> String {
    format!("{granularity}{}.jsonl", if ift { ".ift" } else { "" })
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let raw = fs::read_to_string(path).map_err(BenchError::io(path))?;
        serde_json::from_str(&raw).map_err(|source| BenchError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// The KG file this config trains with, if augmenting.
    pub fn kg_path(&self) -> Result<Option<PathBuf>, BenchError> {
        if !self.augment {
            return Ok(None);
        }
        if let Some(p) = &self.kg_override {
            return Ok(Some(p.clone()));
        }
        match &self.kg_dir {
            Some(dir) => Ok(Some(dir.join(kg_file_name(&self.granularity, self.ift)))),
            None => Err(BenchError::Config(
                "augment is set but neither kg_dir nor kg_override is".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.runs == 0 {
            return Err(BenchError::Config("runs must be >= 1".into()));
        }
        if !self.dataset.exists() {
            return Err(BenchError::Config(format!(
                "dataset {} does not exist (run `demograph prepare` first)",
                self.dataset.display()
            )));
        }
        parse_granularity(&self.granularity)?;
        if self.merge.kgs_per_step == 0 {
            return Err(BenchError::Config("merge.kgs_per_step must be >= 1".into()));
        }
        if let Some(path) = self.kg_path()? {
            if !path.is_file() {
                return Err(BenchError::Config(format!(
                    "KG file {} does not exist",
                    path.display()
                )));
            }
        }
        self.train.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    pub micro_f1: Option<f64>,
    pub best_val_acc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: usize,
    /// File name of the per-epoch metrics CSV, relative to the report.
    pub metrics_csv: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgSummary {
    pub path: PathBuf,
    pub concepts: usize,
    pub edges: usize,
    pub digests: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunRecord>,
    pub completed: usize,
    pub mean_accuracy: Option<f64>,
    pub std_accuracy: Option<f64>,
    pub mean_micro_f1: Option<f64>,
    pub std_micro_f1: Option<f64>,
    pub kg: Option<KgSummary>,
}

impl Report {
    pub fn accuracies(&self) -> Vec<f64> {
        self.runs.iter().filter_map(|r| r.accuracy).collect()
    }

    /// Holds when every completed run has micro-F1 equal to accuracy.
    pub fn metric_identity_holds(&self) -> bool {
        self.runs.iter().all(|r| r.accuracy == r.micro_f1)
    }

    pub fn write(&self, path: &Path) -> Result<(), BenchError> {
        let body = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, body + "\n").map_err(BenchError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self, BenchError> {
        let raw = fs::read_to_string(path).map_err(BenchError::io(path))?;
        serde_json::from_str(&raw).map_err(|source| BenchError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Graph, BenchError> {
    let format = if cfg.dataset.is_dir() {
        GraphFormat::EdgeList
    } else {
        GraphFormat::Json
    };
    let graph = load_graph(&cfg.dataset, format)?;
    match cfg.random_features {
        Some(dim) if graph.num_features() == 0 => Ok(graph.with_random_features(dim, cfg.seed)),
        _ if graph.num_features() == 0 => Err(BenchError::Config(
            "graph has no features; set random_features".into(),
        )),
        _ => Ok(graph),
    }
}

fn run_once(
    graph: &Graph,
    kgs: &[KnowledgeGraph],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<TrainOutcome, GnnError> {
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let merge = cfg.merge.to_config(seed, graph.num_features());
    let merge = (!kgs.is_empty()).then_some(&merge);
    train(graph, kgs, merge, &train_cfg)
}

/// Runs `cfg.runs` seeds and writes `report.json` plus one metrics CSV
/// per run into `cfg.output_dir`. A diverged run is recorded as a
/// failure and the remaining runs still execute.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, BenchError> {
    cfg.validate()?;
    let graph = load_dataset(cfg)?;
    let mut kgs = Vec::new();
    let mut kg_summary = None;
    if let Some(path) = cfg.kg_path()? {
        let kg = load_kg(&path)?;
        kg_summary = Some(KgSummary {
            path: path.clone(),
            concepts: kg.concepts().len(),
            edges: kg.edges().len(),
            digests: kg.provenance().digests.clone(),
        });
        kgs.push(kg);
    }
    fs::create_dir_all(&cfg.output_dir).map_err(BenchError::io(&cfg.output_dir))?;

    let seeds: Vec<u64> = (0..cfg.runs as u64).map(|i| cfg.seed + i).collect();
    let mut runs = Vec::with_capacity(seeds.len());
    for (run, &seed) in seeds.iter().enumerate() {
        let record = match run_once(&graph, &kgs, cfg, seed) {
            Ok(outcome) => {
                let test = &graph.splits().test;
                let mut predictions = vec![usize::MAX; graph.num_nodes()];
                for (&node, &p) in test.iter().zip(&outcome.test_predictions) {
                    predictions[node] = p;
                }
                let m = compute_metrics(&predictions, graph.labels(), test)?;
                let csv_name = format!("run_{run:02}_seed_{seed}.csv");
                write_metrics_csv(&outcome.metrics, &cfg.output_dir.join(&csv_name))?;
                info!(
                    "{} run {run} (seed {seed}): accuracy {:.4}",
                    cfg.name, m.accuracy
                );
                RunRecord {
                    run,
                    seed,
                    accuracy: Some(m.accuracy),
                    micro_f1: Some(m.micro_f1),
                    best_val_acc: Some(outcome.best_val_acc),
                    best_epoch: Some(outcome.best_epoch),
                    epochs_run: outcome.metrics.len(),
                    metrics_csv: Some(csv_name),
                    error: None,
                }
            }
            Err(e @ (GnnError::Divergence { .. } | GnnError::NonFinite { .. })) => {
                warn!("{} run {run} (seed {seed}) failed: {e}", cfg.name);
                let epochs_run = match &e {
                    GnnError::Divergence { epoch, .. } => *epoch,
                    _ => 0,
                };
                RunRecord {
                    run,
                    seed,
                    accuracy: None,
                    micro_f1: None,
                    best_val_acc: None,
                    best_epoch: None,
                    epochs_run,
                    metrics_csv: None,
                    error: Some(e.to_string()),
                }
            }
            Err(e) => return Err(e.into()),
        };
        runs.push(record);
    }

    let acc: Vec<f64> = runs.iter().filter_map(|r| r.accuracy).collect();
    let f1: Vec<f64> = runs.iter().filter_map(|r| r.micro_f1).collect();
    let (mean_accuracy, std_accuracy) = mean_std(&acc);
    let (mean_micro_f1, std_micro_f1) = mean_std(&f1);
    let report = Report {
        name: cfg.name.clone(),
        config: cfg.clone(),
        seeds,
        completed: acc.len(),
        runs,
        mean_accuracy,
        std_accuracy,
        mean_micro_f1,
        std_micro_f1,
        kg: kg_summary,
    };
    report.write(&cfg.output_dir.join("report.json"))?;
    Ok(report)
}
