use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use demograph_bench::ablation::{comparison_csv, comparison_markdown};
use demograph_bench::pipeline::{self, SessionOptions};
use demograph_bench::{
    load_config, prepare_dataset, run_ablation, run_experiment, BenchError, DatasetName, Report,
    Suite, SuiteEntry,
};
use demograph_core::{load_kg, save_graph, save_kg, MergeConfig, MergeMode, SbmConfig};
use demograph_llm::Gateway;
use log::info;

#[derive(Parser)]
#[command(
    name = "demograph",
    version,
    about = "LLM-built knowledge graphs as training-time graph augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a graph JSON file from raw data or the SBM generator.
    Prepare {
        #[arg(long)]
        dataset: String,
        /// Directory holding `<name>.content` and `<name>.cites`.
        #[arg(long)]
        raw: Option<PathBuf>,
        #[arg(long, default_value_t = 7)]
        sbm_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prompt the LLM for triples and write the resulting KG.
    Generate {
        #[arg(long)]
        context: PathBuf,
        #[arg(long, default_value = "s0")]
        granularity: String,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prune a KG by re-prompting the LLM with its own triples.
    Prune {
        #[arg(long)]
        kg: PathBuf,
        #[arg(long)]
        keep: usize,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        /// Write one audit record per round here.
        #[arg(long)]
        audit: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the augmented graph of one epoch.
    Augment {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, required = true)]
        kg: Vec<PathBuf>,
        #[arg(long = "n-c", default_value_t = 3)]
        edges_per_concept: usize,
        #[arg(long, default_value_t = 1)]
        kgs_per_step: usize,
        #[arg(long, default_value = "dynamic")]
        mode: MergeMode,
        #[arg(long, default_value_t = 0)]
        epoch: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment: repeated seeds, report JSON and metric CSVs.
    Train(ConfigArgs),
    /// Run one ablation suite over a base config.
    Ablate {
        #[arg(long)]
        suite: Suite,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Tabulate report JSON files as markdown (and CSV with --csv).
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Args)]
struct LlmArgs {
    /// Serve responses from this directory of frozen entries instead of
    /// the network.
    #[arg(long)]
    replay: Option<PathBuf>,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    model: String,
    /// Persist every live response here.
    #[arg(long)]
    cache: Option<PathBuf>,
}

impl LlmArgs {
    fn gateway(&self) -> Result<Gateway, BenchError> {
        match &self.replay {
            Some(dir) => Ok(Gateway::replay(dir)),
            None => Ok(Gateway::from_env()?),
        }
    }

    fn options(&self, audit: Option<PathBuf>) -> SessionOptions {
        SessionOptions {
            model: self.model.clone(),
            cache_dir: self.cache.clone(),
            audit_dir: audit,
        }
    }
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config field, e.g. `--set train.lr=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<demograph_bench::ExperimentConfig, BenchError> {
        let mut overrides = self.overrides.clone();
        if let Some(r) = self.runs {
            overrides.push(format!("runs={r}"));
        }
        if let Some(s) = self.seed {
            overrides.push(format!("seed={s}"));
        }
        if let Some(d) = &self.output_dir {
            let json = serde_json::to_string(d).expect("path serializes");
            overrides.push(format!("output_dir={json}"));
        }
        load_config(self.config.as_deref(), &overrides)
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(BenchError::io(parent))?;
    }
    fs::write(path, text).map_err(BenchError::io(path))
}

fn summarize(report: &Report) {
    match (report.mean_accuracy, report.std_accuracy) {
        (Some(m), Some(s)) => println!(
            "{}: accuracy {:.2} ({:.2}) over {}/{} runs",
            report.name,
            100.0 * m,
            100.0 * s,
            report.completed,
            report.runs.len()
        ),
        (Some(m), None) => println!("{}: accuracy {:.2} (1 run)", report.name, 100.0 * m),
        _ => println!("{}: no run completed", report.name),
    }
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Prepare {
            dataset,
            raw,
            sbm_seed,
            out,
        } => {
            let name: DatasetName = dataset.parse()?;
            let sbm = SbmConfig {
                seed: sbm_seed,
                ..SbmConfig::default()
            };
            let g = prepare_dataset(name, raw.as_deref(), &sbm, &out)?;
            let s = g.splits();
            println!(
                "{name}: {} nodes, {} features, {} classes, splits {}/{}/{} -> {}",
                g.num_nodes(),
                g.num_features(),
                g.num_classes(),
                s.train.len(),
                s.val.len(),
                s.test.len(),
                out.display()
            );
        }
        Command::Generate {
            context,
            granularity,
            llm,
            out,
        } => {
            let ctx = pipeline::load_context(&context)?;
            let gateway = llm.gateway()?;
            let report = pipeline::generate(&gateway, &llm.options(None), &ctx, &granularity)?;
            save_kg(&report.kg, &out)?;
            println!(
                "{} prompts, {} edges over {} concepts ({} skipped lines, {} duplicates) -> {}",
                report.prompts,
                report.kg.edges().len(),
                report.kg.concepts().len(),
                report.skipped_lines,
                report.duplicates,
                out.display()
            );
        }
        Command::Prune {
            kg,
            keep,
            rounds,
            audit,
            llm,
            out,
        } => {
            let input = load_kg(&kg)?;
            let gateway = llm.gateway()?;
            let report = pipeline::prune(&gateway, &llm.options(audit), &input, keep, rounds)?;
            save_kg(&report.kg, &out)?;
            println!(
                "{} -> {} edges after {} round(s){} -> {}",
                input.edges().len(),
                report.kg.edges().len(),
                report.rounds_completed,
                if report.aborted {
                    " (stopped on an empty answer)"
                } else {
                    ""
                },
                out.display()
            );
        }
        Command::Augment {
            graph,
            kg,
            edges_per_concept,
            kgs_per_step,
            mode,
            epoch,
            seed,
            out,
        } => {
            let cfg = demograph_bench::ExperimentConfig {
                dataset: graph,
                ..Default::default()
            };
            let base = demograph_bench::experiment::load_dataset(&cfg)?;
            let kgs = kg
                .iter()
                .map(|p| load_kg(p))
                .collect::<Result<Vec<_>, _>>()?;
            let merge = MergeConfig {
                kgs_per_step,
                ..MergeConfig::new(edges_per_concept, mode, seed, base.num_features())
            };
            let view = pipeline::augment(&base, &kgs, &merge, epoch)?;
            save_graph(&view.graph, &out)?;
            println!(
                "{} original + {} concept nodes, {} KG edges, {} attachment edges -> {}",
                view.num_original,
                view.num_concepts(),
                view.kg_edges.len(),
                view.conn_edges.len(),
                out.display()
            );
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            let report = run_experiment(&cfg)?;
            summarize(&report);
            if report.completed == 0 {
                return Err(BenchError::Run("every run failed".into()));
            }
        }
        Command::Ablate { suite, config } => {
            let base = config.load()?;
            let entries = run_ablation(suite, &base)?;
            print!(
                "{}",
                comparison_markdown(&format!("{} / {suite}", base.name), &entries)
            );
        }
        Command::Report { reports, out, csv } => {
            let entries = reports
                .iter()
                .map(|p| {
                    Report::read(p).map(|report| SuiteEntry {
                        label: report.name.clone(),
                        report,
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let md = comparison_markdown("reports", &entries);
            match out {
                Some(path) => write_text(&path, &md)?,
                None => print!("{md}"),
            }
            if let Some(path) = csv {
                write_text(&path, &comparison_csv(&entries))?;
            }
            info!("tabulated {} reports", entries.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
