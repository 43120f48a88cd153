//! Ablation suites: grids of experiments that vary one factor of a base
//! config.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use demograph_core::MergeMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::BenchError;
use crate::experiment::{run_experiment, ExperimentConfig, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    EdgesPerConcept,
    MergingMode,
    GranularityIft,
    BiasedKg,
    WithWithoutKg,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::EdgesPerConcept,
        Suite::MergingMode,
        Suite::GranularityIft,
        Suite::BiasedKg,
        Suite::WithWithoutKg,
    ];

    /// Config keys (dotted paths) the suite is allowed to vary.
    pub fn factors(&self) -> &'static [&'static str] {
        match self {
            Suite::EdgesPerConcept => &["merge.edges_per_concept"],
            Suite::MergingMode => &["merge.mode"],
            Suite::GranularityIft => &["granularity", "ift"],
            Suite::BiasedKg => &["kg_override"],
            Suite::WithWithoutKg => &["augment"],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::EdgesPerConcept => "edges_per_concept",
            Suite::MergingMode => "merging_mode",
            Suite::GranularityIft => "granularity_ift",
            Suite::BiasedKg => "biased_kg",
            Suite::WithWithoutKg => "with_without_kg",
        })
    }
}

impl FromStr for Suite {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.to_string() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown ablation suite {s:?}")))
    }
}

pub const EDGES_PER_CONCEPT_GRID: [usize; 4] = [0, 3, 30, 100];
pub const GRANULARITY_GRID: [&str; 3] = ["s0", "s1", "s0+s1"];

/// Labeled variants of `base` for `suite`. Each variant writes into its
/// own subdirectory of `base.output_dir`.
pub fn suite_configs(
    suite: Suite,
    base: &ExperimentConfig,
) -> Result<Vec<(String, ExperimentConfig)>, BenchError> {
    let needs_kg = |what: &str| {
        if base.augment {
            Ok(())
        } else {
            Err(BenchError::Config(format!(
                "{what} suite needs augment = true in the base config"
            )))
        }
    };
    let variant = |label: String, edit: &dyn Fn(&mut ExperimentConfig)| {
        let mut cfg = base.clone();
        edit(&mut cfg);
        cfg.name = format!("{}/{suite}/{label}", base.name);
        cfg.output_dir = base.output_dir.join(suite.to_string()).join(&label);
        (label, cfg)
    };
    let variants = match suite {
        Suite::EdgesPerConcept => {
            needs_kg("edges_per_concept")?;
            EDGES_PER_CONCEPT_GRID
                .iter()
                .map(|&n| variant(format!("n_c={n}"), &|c| c.merge.edges_per_concept = n))
                .collect()
        }
        Suite::MergingMode => {
            needs_kg("merging_mode")?;
            [MergeMode::Static, MergeMode::Dynamic]
                .iter()
                .map(|&m| variant(m.to_string(), &|c| c.merge.mode = m))
                .collect()
        }
        Suite::GranularityIft => {
            needs_kg("granularity_ift")?;
            let mut out = Vec::new();
            for g in GRANULARITY_GRID {
                for ift in [false, true] {
                    let label = format!("{g}{}", if ift { "+ift" } else { "" });
                    out.push(variant(label, &|c| {
                        c.granularity = g.to_string();
                        c.ift = ift;
                    }));
                }
            }
            out
        }
        Suite::BiasedKg => {
            needs_kg("biased_kg")?;
            let foreign = base
                .foreign_kg
                .clone()
                .ok_or_else(|| BenchError::Config("biased_kg suite needs foreign_kg".into()))?;
            if !foreign.is_file() {
                return Err(BenchError::Config(format!(
                    "foreign KG {} does not exist",
                    foreign.display()
                )));
            }
            vec![
                variant("own".into(), &|c| c.kg_override = base.kg_override.clone()),
                variant("biased".into(), &|c| c.kg_override = Some(foreign.clone())),
            ]
        }
        Suite::WithWithoutKg => [false, true]
            .iter()
            .map(|&a| {
                variant(if a { "with_kg" } else { "without_kg" }.into(), &|c| {
                    c.augment = a
                })
            })
            .collect(),
    };
    check_one_factor(suite, &variants)?;
    Ok(variants)
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

/// Dotted keys whose values differ somewhere across `configs`, ignoring
/// `name` and `output_dir`.
pub fn varied_fields(configs: &[&ExperimentConfig]) -> BTreeSet<String> {
    let flat: Vec<Vec<(String, Value)>> = configs
        .iter()
        .map(|c| {
            let mut out = Vec::new();
            flatten(
                "",
                &serde_json::to_value(c).expect("config serializes"),
                &mut out,
            );
            out
        })
        .collect();
    let mut varied = BTreeSet::new();
    if let Some(first) = flat.first() {
        for other in &flat[1..] {
            for ((k, a), (_, b)) in first.iter().zip(other) {
                if a != b && k != "name" && k != "output_dir" {
                    varied.insert(k.clone());
                }
            }
        }
    }
    varied
}

fn check_one_factor(
    suite: Suite,
    variants: &[(String, ExperimentConfig)],
) -> Result<(), BenchError> {
    let configs: Vec<&ExperimentConfig> = variants.iter().map(|(_, c)| c).collect();
    let varied = varied_fields(&configs);
    let allowed: BTreeSet<String> = suite.factors().iter().map(|s| s.to_string()).collect();
    if !varied.is_subset(&allowed) {
        return Err(BenchError::Config(format!(
            "{suite} suite varies {varied:?}, expected only {allowed:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub label: String,
    pub report: Report,
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

pub fn comparison_csv(entries: &[SuiteEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "variant",
        "completed",
        "mean_accuracy",
        "std_accuracy",
        "mean_micro_f1",
        "std_micro_f1",
    ])
    .expect("in-memory csv");
    for e in entries {
        let r = &e.report;
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            e.label.clone(),
            r.completed.to_string(),
            opt(r.mean_accuracy),
            opt(r.std_accuracy),
            opt(r.mean_micro_f1),
            opt(r.std_micro_f1),
        ])
        .expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Accuracy in percent, with the standard deviation in brackets when
/// there are at least two completed runs.
pub fn comparison_markdown(title: &str, entries: &[SuiteEntry]) -> String {
    let mut out = format!(
        "## {title}\n\n| variant | runs | accuracy (%) | micro-F1 (%) |\n|---|---|---|---|\n"
    );
    for e in entries {
        let r = &e.report;
        let cell = |m: Option<f64>, s: Option<f64>| match s {
            Some(s) => format!("{} ({})", pct(m), pct(Some(s))),
            None => pct(m),
        };
        out.push_str(&format!(
            "| {} | {}/{} | {} | {} |\n",
            e.label,
            r.completed,
            r.runs.len(),
            cell(r.mean_accuracy, r.std_accuracy),
            cell(r.mean_micro_f1, r.std_micro_f1)
        ));
    }
    out
}

/// Runs every variant of `suite` and writes `comparison.csv` and
/// `comparison.md` next to the per-variant reports.
pub fn run_ablation(suite: Suite, base: &ExperimentConfig) -> Result<Vec<SuiteEntry>, BenchError> {
    let variants = suite_configs(suite, base)?;
    for (_, cfg) in &variants {
        cfg.validate()?;
    }
    let mut entries = Vec::with_capacity(variants.len());
    for (label, cfg) in variants {
        entries.push(SuiteEntry {
            label,
            report: run_experiment(&cfg)?,
        });
    }
    let dir: PathBuf = base.output_dir.join(suite.to_string());
    fs::create_dir_all(&dir).map_err(BenchError::io(&dir))?;
    let csv_path = dir.join("comparison.csv");
    fs::write(&csv_path, comparison_csv(&entries)).map_err(BenchError::io(&csv_path))?;
    let md_path = dir.join("comparison.md");
    let title = format!("{} / {suite}", base.name);
    fs::write(&md_path, comparison_markdown(&title, &entries)).map_err(BenchError::io(&md_path))?;
    Ok(entries)
}
