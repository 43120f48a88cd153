//! KG generation, pruning and merging steps shared by the CLI and tests.

use std::fs;
use std::path::{Path, PathBuf};

use demograph_core::kg::{GenerationReport, PruneReport};
use demograph_core::prompt::parse_granularity;
use demograph_core::{
    epoch_view, generate_kg, prune_via_ift, AugmentedGraph, DatasetContext, Graph, KnowledgeGraph,
    LlmSession, MergeConfig,
};
use demograph_llm::ChatBackend;

use crate::error::BenchError;

pub fn load_context(path: &Path) -> Result<DatasetContext, BenchError> {
    let raw = fs::read_to_string(path).map_err(BenchError::io(path))?;
    serde_json::from_str(&raw).map_err(|source| BenchError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Where LLM calls go and what gets persisted along the way.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    pub model: String,
    pub cache_dir: Option<PathBuf>,
    pub audit_dir: Option<PathBuf>,
}

fn session<'a>(backend: &'a dyn ChatBackend, opts: &SessionOptions) -> LlmSession<'a> {
    let mut s = LlmSession::new(backend, opts.model.clone());
    s.cache_dir = opts.cache_dir.clone();
    s.audit_dir = opts.audit_dir.clone();
    s
}

pub fn generate(
    backend: &dyn ChatBackend,
    opts: &SessionOptions,
    ctx: &DatasetContext,
    granularity: &str,
) -> Result<GenerationReport, BenchError> {
    let levels = parse_granularity(granularity)?;
    Ok(generate_kg(&session(backend, opts), ctx, &levels)?)
}

pub fn prune(
    backend: &dyn ChatBackend,
    opts: &SessionOptions,
    kg: &KnowledgeGraph,
    keep: usize,
    rounds: usize,
) -> Result<PruneReport, BenchError> {
    Ok(prune_via_ift(&session(backend, opts), kg, keep, rounds)?)
}

/// Generation followed by optional IFT pruning (`keep`, `rounds`).
pub fn build_kg(
    backend: &dyn ChatBackend,
    opts: &SessionOptions,
    ctx: &DatasetContext,
    granularity: &str,
    ift: Option<(usize, usize)>,
) -> Result<KnowledgeGraph, BenchError> {
    let generated = generate(backend, opts, ctx, granularity)?.kg;
    match ift {
        Some((keep, rounds)) => Ok(prune(backend, opts, &generated, keep, rounds)?.kg),
        None => Ok(generated),
    }
}

/// The augmented graph seen at `epoch`, with feature width taken from
/// the base graph.
pub fn augment(
    graph: &Graph,
    kgs: &[KnowledgeGraph],
    merge: &MergeConfig,
    epoch: u64,
) -> Result<AugmentedGraph, BenchError> {
    Ok(epoch_view(graph, kgs, merge, epoch)?)
}
