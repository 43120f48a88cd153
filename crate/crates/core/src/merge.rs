//! Stochastic merging of knowledge-graph concepts into an observed graph.
//!
//! Each concept becomes a new node. Concept-concept edges come from the
//! KG; every concept is additionally wired to `n_c` original nodes drawn
//! uniformly without replacement. In dynamic mode the draw is repeated
//! every epoch from an rng stream keyed by `(seed, epoch)`; in static mode
//! the epoch-0 draw is reused.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::MergeError;
use crate::graph::{DenseMatrix, Graph, GraphParts, NodeOrigin};
use crate::kg::{union_kgs, KnowledgeGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MergeMode {
    Dynamic,
    Static,
}

impl FromStr for MergeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dynamic" => Ok(MergeMode::Dynamic),
            "static" => Ok(MergeMode::Static),
            other => Err(format!("unknown merge mode {other:?}")),
        }
    }
}

impl fmt::Display for MergeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MergeMode::Dynamic => "dynamic",
            MergeMode::Static => "static",
        })
    }
}

/// Whether each concept draws its own anchors or all concepts share one
/// draw per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSampling {
    #[default]
    PerConcept,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeConfig {
    /// `n_c`: attachment edges per concept node.
    pub edges_per_concept: usize,
    /// `K`: KGs unioned per step.
    pub kgs_per_step: usize,
    pub mode: MergeMode,
    pub seed: u64,
    pub concept_feature_dim: usize,
    #[serde(default)]
    pub anchor_sampling: AnchorSampling,
}

impl MergeConfig {
    pub fn new(
        edges_per_concept: usize,
        mode: MergeMode,
        seed: u64,
        concept_feature_dim: usize,
    ) -> Self {
        Self {
            edges_per_concept,
            kgs_per_step: 1,
            mode,
            seed,
            concept_feature_dim,
            anchor_sampling: AnchorSampling::PerConcept,
        }
    }

    pub fn validate(&self) -> Result<(), MergeError> {
        if self.kgs_per_step == 0 {
            return Err(MergeError::Config("kgs_per_step must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    /// Original nodes first (ids unchanged), concept nodes appended.
    pub graph: Graph,
    pub num_original: usize,
    pub concept_index_map: BTreeMap<String, usize>,
    /// KG edges mapped to node ids (relations erased, directed).
    pub kg_edges: Vec<(usize, usize)>,
    /// Concept-to-anchor attachment edges for this view.
    pub conn_edges: Vec<(usize, usize)>,
}

impl AugmentedGraph {
    pub fn num_concepts(&self) -> usize {
        self.concept_index_map.len()
    }

    /// The graph restricted to the original node ids.
    pub fn original_subgraph(&self) -> Graph {
        let n = self.num_original;
        let parts = self.graph.clone().into_parts();
        let f = parts.features.cols();
        let features = DenseMatrix::from_vec(n, f, parts.features.data()[..n * f].to_vec())
            .expect("prefix rows");
        Graph::new(GraphParts {
            features,
            labels: parts.labels[..n].to_vec(),
            edges: parts
                .edges
                .into_iter()
                .filter(|&(s, d)| s < n && d < n)
                .collect(),
            splits: parts.splits,
            origin: parts.origin[..n].to_vec(),
        })
        .expect("restriction of a valid graph is valid")
    }
}

/// Deterministic rng for a given `(seed, epoch)`: one ChaCha stream per
/// epoch.
pub fn epoch_rng(seed: u64, epoch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    rng
}

fn sample_from<R: Rng + ?Sized>(pool: &[usize], n: usize, rng: &mut R) -> Vec<usize> {
    let amount = n.min(pool.len());
    let mut picked: Vec<usize> = index::sample(rng, pool.len(), amount)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    picked.sort_unstable();
    picked
}

/// Uniform sample without replacement of `min(n_c, |V0|)` original nodes,
/// returned in ascending order.
pub fn sample_anchor_nodes<R: Rng + ?Sized>(graph: &Graph, n_c: usize, rng: &mut R) -> Vec<usize> {
    sample_from(&graph.original_nodes(), n_c, rng)
}

/// `num_concepts x dim` matrix with i.i.d. N(0, 1/dim) entries.
pub fn init_concept_features<R: Rng + ?Sized>(
    num_concepts: usize,
    dim: usize,
    rng: &mut R,
) -> DenseMatrix {
    if dim == 0 {
        return DenseMatrix::zeros(num_concepts, 0);
    }
    let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("valid std");
    let data = (0..num_concepts * dim)
        .map(|_| normal.sample(rng))
        .collect();
    DenseMatrix::from_vec(num_concepts, dim, data).expect("sized")
}

/// Sorted union of concept strings across `kgs`; the stable concept
/// identity used for trainable concept embeddings.
pub fn concept_vocabulary(kgs: &[KnowledgeGraph]) -> Vec<String> {
    kgs.iter()
        .flat_map(|k| k.concepts().iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

pub fn merge_kgs<R: Rng + ?Sized>(
    graph: &Graph,
    kgs: &[KnowledgeGraph],
    cfg: &MergeConfig,
    rng: &mut R,
) -> Result<AugmentedGraph, MergeError> {
    cfg.validate()?;
    if cfg.concept_feature_dim != graph.num_features() {
        return Err(MergeError::FeatureDim {
            expected: graph.num_features(),
            got: cfg.concept_feature_dim,
        });
    }
    let selected: Vec<KnowledgeGraph> = if kgs.len() <= cfg.kgs_per_step {
        kgs.to_vec()
    } else {
        let mut idx: Vec<usize> = index::sample(rng, kgs.len(), cfg.kgs_per_step).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| kgs[i].clone()).collect()
    };
    let kg = union_kgs(&selected);

    let n0 = graph.num_nodes();
    let concept_index_map: BTreeMap<String, usize> = kg
        .concepts()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), n0 + i))
        .collect();
    let kg_edges: Vec<(usize, usize)> = kg
        .directed_pairs()
        .into_iter()
        .map(|(h, t)| (concept_index_map[h], concept_index_map[t]))
        .collect();

    let pool = graph.original_nodes();
    let mut conn_edges = Vec::new();
    match cfg.anchor_sampling {
        AnchorSampling::PerConcept => {
            for &cid in concept_index_map.values() {
                for z in sample_from(&pool, cfg.edges_per_concept, rng) {
                    conn_edges.push((cid, z));
                }
            }
        }
        AnchorSampling::Shared => {
            let shared = sample_from(&pool, cfg.edges_per_concept, rng);
            for &cid in concept_index_map.values() {
                conn_edges.extend(shared.iter().map(|&z| (cid, z)));
            }
        }
    }

    let num_concepts = concept_index_map.len();
    let concept_features = init_concept_features(num_concepts, cfg.concept_feature_dim, rng);
    let mut parts = graph.clone().into_parts();
    parts.features = parts.features.vstack(&concept_features)?;
    parts.labels.extend(std::iter::repeat_n(None, num_concepts));
    parts
        .origin
        .extend(std::iter::repeat_n(NodeOrigin::Concept, num_concepts));
    parts.edges.extend_from_slice(&kg_edges);
    parts.edges.extend_from_slice(&conn_edges);

    Ok(AugmentedGraph {
        graph: Graph::new(parts)?,
        num_original: n0,
        concept_index_map,
        kg_edges,
        conn_edges,
    })
}

/// The augmented graph seen at `epoch`.
pub fn epoch_view(
    base: &Graph,
    kgs: &[KnowledgeGraph],
    cfg: &MergeConfig,
    epoch: u64,
) -> Result<AugmentedGraph, MergeError> {
    let stream = match cfg.mode {
        MergeMode::Dynamic => epoch,
        MergeMode::Static => 0,
    };
    merge_kgs(base, kgs, cfg, &mut epoch_rng(cfg.seed, stream))
}
