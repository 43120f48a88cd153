//! Graph data augmentation driven by LLM-generated knowledge graphs.
//!
//! - [`graph`]: observed graphs, features, splits, normalized adjacency
//! - [`triples`]: `[head, relation, tail]` extraction from LLM text
//! - [`prompt`]: placeholder templates and granularity-aware planning
//! - [`kg`]: knowledge-graph build/union/persist and LLM pruning
//! - [`merge`]: per-epoch stochastic merging into the observed graph
//! - [`synthetic`]: seeded stochastic-block-model graphs

pub mod error;
pub mod graph;
pub mod kg;
pub mod merge;
pub mod prompt;
pub mod synthetic;
pub mod triples;

pub use error::{GraphError, KgError, MergeError, PromptError};
pub use graph::{
    load_graph, normalized_adjacency, save_graph, DenseMatrix, Graph, GraphFormat, GraphParts,
    NodeOrigin, SparseAdjacency, Splits,
};
pub use kg::{
    build_kg, generate_kg, load_kg, prune_via_ift, save_kg, union_kgs, KgEdge, KnowledgeGraph,
    LlmSession, Provenance, Stoplist,
};
pub use merge::{
    epoch_view, init_concept_features, merge_kgs, sample_anchor_nodes, AnchorSampling,
    AugmentedGraph, MergeConfig, MergeMode,
};
pub use prompt::{DatasetContext, GranularityLevel, TemplateKind, Templates};
pub use synthetic::{sbm_graph, SbmConfig};
pub use triples::{normalize_entity, parse_triples, Triple};
