//! GCN and GAT parameterizations and their forward passes.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::rc::Rc;
use std::str::FromStr;

use demograph_core::{normalized_adjacency, Graph, SparseAdjacency};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::GnnError;
use crate::tape::{EdgeIndex, Tape, Var};
use crate::tensor::Tensor;

pub const GAT_NEGATIVE_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Gat,
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Architecture::Gcn),
            "gat" => Ok(Architecture::Gat),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Architecture::Gcn => "gcn",
            Architecture::Gat => "gat",
        })
    }
}

/// Layer dimensions. For GAT, `hidden` is the concatenated width of a
/// hidden layer, split evenly over `heads`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub in_dim: usize,
    pub hidden: usize,
    pub num_classes: usize,
    pub layers: usize,
    pub heads: usize,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), GnnError> {
        if self.layers == 0 {
            return Err(GnnError::Config("layers must be >= 1".into()));
        }
        if self.num_classes == 0 {
            return Err(GnnError::Config("need at least one class".into()));
        }
        if self.layers > 1 && self.hidden == 0 {
            return Err(GnnError::Config("hidden dim must be >= 1".into()));
        }
        if self.architecture == Architecture::Gat {
            if self.heads == 0 {
                return Err(GnnError::Config("heads must be >= 1".into()));
            }
            if self.layers > 1 && !self.hidden.is_multiple_of(self.heads) {
                return Err(GnnError::Config(format!(
                    "hidden {} is not divisible by {} heads",
                    self.hidden, self.heads
                )));
            }
        }
        Ok(())
    }

    fn heads(&self) -> usize {
        match self.architecture {
            Architecture::Gcn => 1,
            Architecture::Gat => self.heads,
        }
    }

    /// `(input width, per-head output width, output width)` of layer `l`.
    fn layer_dims(&self, l: usize) -> (usize, usize, usize) {
        let input = if l == 0 { self.in_dim } else { self.hidden };
        let last = l + 1 == self.layers;
        match (self.architecture, last) {
            (_, true) => (input, self.num_classes, self.num_classes),
            (Architecture::Gcn, false) => (input, self.hidden, self.hidden),
            (Architecture::Gat, false) => (input, self.hidden / self.heads, self.hidden),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// One weight matrix per head (a single one for GCN).
    pub weights: Vec<Tensor>,
    /// GAT only: per-head source / destination scoring vectors.
    pub att_src: Vec<Tensor>,
    pub att_dst: Vec<Tensor>,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spec: ModelSpec,
    pub layers: Vec<LayerParams>,
    /// One trainable feature row per concept in `concept_vocab`.
    pub concept_embedding: Tensor,
    pub concept_vocab: Vec<String>,
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let a = (6.0 / (rows + cols).max(1) as f64).sqrt();
    let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

impl ModelParams {
    /// Glorot-uniform weights and attention vectors, zero biases.
    /// `concept_embedding` must have `concept_vocab.len()` rows of width
    /// `spec.in_dim`.
    pub fn init<R: Rng + ?Sized>(
        spec: ModelSpec,
        concept_vocab: Vec<String>,
        concept_embedding: Tensor,
        rng: &mut R,
    ) -> Result<Self, GnnError> {
        spec.validate()?;
        if concept_embedding.rows() != concept_vocab.len()
            || (!concept_vocab.is_empty() && concept_embedding.cols() != spec.in_dim)
        {
            return Err(GnnError::shape(
                "concept_embedding",
                format!(
                    "{:?} for {} concepts of width {}",
                    concept_embedding.shape(),
                    concept_vocab.len(),
                    spec.in_dim
                ),
            ));
        }
        let concept_embedding = if concept_vocab.is_empty() {
            Tensor::zeros(0, spec.in_dim)
        } else {
            concept_embedding
        };
        let layers = (0..spec.layers)
            .map(|l| {
                let (input, per_head, out) = spec.layer_dims(l);
                let heads = spec.heads();
                let weights = (0..heads).map(|_| glorot(input, per_head, rng)).collect();
                let (att_src, att_dst) = match spec.architecture {
                    Architecture::Gcn => (vec![], vec![]),
                    Architecture::Gat => (
                        (0..heads).map(|_| glorot(per_head, 1, rng)).collect(),
                        (0..heads).map(|_| glorot(per_head, 1, rng)).collect(),
                    ),
                };
                LayerParams {
                    weights,
                    att_src,
                    att_dst,
                    bias: Tensor::zeros(1, out),
                }
            })
            .collect();
        Ok(Self {
            spec,
            layers,
            concept_embedding,
            concept_vocab,
        })
    }

    /// Parameters in a fixed order, with stable names.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for (h, w) in layer.weights.iter().enumerate() {
                out.push((format!("layer{l}.weight.head{h}"), w));
            }
            for (h, a) in layer.att_src.iter().enumerate() {
                out.push((format!("layer{l}.att_src.head{h}"), a));
            }
            for (h, a) in layer.att_dst.iter().enumerate() {
                out.push((format!("layer{l}.att_dst.head{h}"), a));
            }
            out.push((format!("layer{l}.bias"), &layer.bias));
        }
        out.push(("concept_embedding".into(), &self.concept_embedding));
        out
    }

    /// Same order as [`ModelParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.weights.iter_mut());
            out.extend(layer.att_src.iter_mut());
            out.extend(layer.att_dst.iter_mut());
            out.push(&mut layer.bias);
        }
        out.push(&mut self.concept_embedding);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.all_finite())
    }
}

/// Structure and features for one forward pass.
#[derive(Debug, Clone)]
pub struct GraphInput {
    /// Features of the original nodes.
    pub features: Rc<Tensor>,
    /// For each concept node (in node-id order after the originals), its
    /// row in the concept embedding.
    pub concept_rows: Rc<Vec<usize>>,
    pub adjacency: Option<Rc<SparseAdjacency>>,
    pub edges: Option<Rc<EdgeIndex>>,
}

impl GraphInput {
    /// Builds the structure `architecture` needs from `graph`, whose first
    /// `features.rows()` nodes are original and the rest concepts.
    pub fn new(
        architecture: Architecture,
        graph: &Graph,
        features: Rc<Tensor>,
        concept_rows: Vec<usize>,
    ) -> Result<Self, GnnError> {
        if features.rows() + concept_rows.len() != graph.num_nodes() {
            return Err(GnnError::shape(
                "graph_input",
                format!(
                    "{} feature rows + {} concepts for {} nodes",
                    features.rows(),
                    concept_rows.len(),
                    graph.num_nodes()
                ),
            ));
        }
        let (adjacency, edges) = match architecture {
            Architecture::Gcn => (Some(Rc::new(normalized_adjacency(graph))), None),
            Architecture::Gat => (None, Some(Rc::new(EdgeIndex::with_self_loops(graph)))),
        };
        Ok(Self {
            features,
            concept_rows: Rc::new(concept_rows),
            adjacency,
            edges,
        })
    }

    /// A graph without concept nodes, using its own features.
    pub fn plain(architecture: Architecture, graph: &Graph) -> Result<Self, GnnError> {
        Self::new(
            architecture,
            graph,
            Rc::new(Tensor::from(graph.features())),
            vec![],
        )
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows() + self.concept_rows.len()
    }
}

/// Inverted dropout with its own rng.
pub struct Dropout<'a, R: Rng + ?Sized> {
    pub rate: f64,
    pub rng: &'a mut R,
}

impl<R: Rng + ?Sized> Dropout<'_, R> {
    fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var, GnnError> {
        if self.rate <= 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - self.rate);
        let n = tape.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| {
                if self.rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        tape.mask(x, Rc::new(mask))
    }
}

pub struct Forward {
    pub logits: Var,
    /// Tape leaves for every parameter, in [`ModelParams::named_tensors`] order.
    pub params: Vec<Var>,
}

/// Records a forward pass. Dropout is applied to the input of every layer
/// when `dropout` is given.
pub fn forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    params: &ModelParams,
    input: &GraphInput,
    mut dropout: Option<&mut Dropout<'_, R>>,
) -> Result<Forward, GnnError> {
    let spec = &params.spec;
    if input.features.cols() != spec.in_dim {
        return Err(GnnError::shape(
            "forward",
            format!(
                "features have {} columns, model expects {}",
                input.features.cols(),
                spec.in_dim
            ),
        ));
    }
    let param_vars: Vec<Var> = params
        .named_tensors()
        .into_iter()
        .map(|(_, t)| tape.param(t.clone()))
        .collect();
    let mut cursor = param_vars.iter().copied();
    let mut layer_vars = Vec::with_capacity(spec.layers);
    for layer in &params.layers {
        let w: Vec<Var> = cursor.by_ref().take(layer.weights.len()).collect();
        let a_src: Vec<Var> = cursor.by_ref().take(layer.att_src.len()).collect();
        let a_dst: Vec<Var> = cursor.by_ref().take(layer.att_dst.len()).collect();
        let b = cursor.next().expect("bias");
        layer_vars.push((w, a_src, a_dst, b));
    }
    let embedding = cursor.next().expect("concept embedding");

    // layer-0 input kept as (original rows, concept rows) so the constant
    // feature block never needs a gradient
    let mut x_orig = tape.constant(input.features.clone());
    let mut x_concepts = if input.concept_rows.is_empty() {
        None
    } else {
        Some(tape.gather_rows(embedding, input.concept_rows.clone())?)
    };
    if let Some(d) = dropout.as_deref_mut() {
        x_orig = d.apply(tape, x_orig)?;
        if let Some(xc) = x_concepts {
            x_concepts = Some(d.apply(tape, xc)?);
        }
    }

    let mut h: Option<Var> = None;
    for (l, (w, a_src, a_dst, b)) in layer_vars.iter().enumerate() {
        let last = l + 1 == spec.layers;
        let mut x = h;
        if l > 0 {
            if let Some(d) = dropout.as_deref_mut() {
                x = Some(d.apply(tape, x.expect("hidden"))?);
            }
        }
        let mut heads = Vec::with_capacity(w.len());
        for (k, &wk) in w.iter().enumerate() {
            let xw = match x {
                Some(x) => tape.matmul(x, wk)?,
                None => {
                    let top = tape.matmul(x_orig, wk)?;
                    match x_concepts {
                        Some(xc) => {
                            let bottom = tape.matmul(xc, wk)?;
                            tape.vstack(top, bottom)?
                        }
                        None => top,
                    }
                }
            };
            let agg = match spec.architecture {
                Architecture::Gcn => {
                    let adj = input
                        .adjacency
                        .clone()
                        .ok_or_else(|| GnnError::Argument("GCN input lacks an adjacency".into()))?;
                    tape.spmm(adj, xw)?
                }
                Architecture::Gat => {
                    let edges = input.edges.clone().ok_or_else(|| {
                        GnnError::Argument("GAT input lacks an edge index".into())
                    })?;
                    gat_head(tape, xw, a_src[k], a_dst[k], edges)?.1
                }
            };
            heads.push(agg);
        }
        let combined = if heads.len() == 1 {
            heads[0]
        } else if last {
            let mut acc = heads[0];
            for &hv in &heads[1..] {
                acc = tape.add(acc, hv)?;
            }
            tape.scale(acc, 1.0 / heads.len() as f64)?
        } else {
            tape.concat_cols(&heads)?
        };
        let out = tape.add_row(combined, *b)?;
        h = Some(if last {
            out
        } else {
            match spec.architecture {
                Architecture::Gcn => tape.relu(out)?,
                Architecture::Gat => tape.elu(out)?,
            }
        });
    }
    Ok(Forward {
        logits: h.expect("at least one layer"),
        params: param_vars,
    })
}

/// One attention head over pre-transformed features `xw`; returns the
/// per-edge coefficients and the aggregated output.
fn gat_head(
    tape: &mut Tape,
    xw: Var,
    a_src: Var,
    a_dst: Var,
    edges: Rc<EdgeIndex>,
) -> Result<(Var, Var), GnnError> {
    let s_src = tape.matmul(xw, a_src)?;
    let s_dst = tape.matmul(xw, a_dst)?;
    let e = tape.edge_score(s_dst, s_src, edges.clone())?;
    let e = tape.leaky_relu(e, GAT_NEGATIVE_SLOPE)?;
    let alpha = tape.segment_softmax(e, edges.clone())?;
    let out = tape.edge_aggregate(alpha, xw, edges)?;
    Ok((alpha, out))
}

/// First-layer attention coefficients of `head`, aligned with
/// `input.edges` (grouped by destination).
pub fn gat_attention(
    params: &ModelParams,
    input: &GraphInput,
    head: usize,
) -> Result<Vec<f64>, GnnError> {
    let layer = params
        .layers
        .first()
        .filter(|l| head < l.att_src.len())
        .ok_or_else(|| GnnError::Argument(format!("no attention head {head} in layer 0")))?;
    let edges = input
        .edges
        .clone()
        .ok_or_else(|| GnnError::Argument("GAT input lacks an edge index".into()))?;
    let mut tape = Tape::new();
    let w = tape.constant(layer.weights[head].clone());
    let a_src = tape.constant(layer.att_src[head].clone());
    let a_dst = tape.constant(layer.att_dst[head].clone());
    let x = tape.constant(input.features.clone());
    let mut xw = tape.matmul(x, w)?;
    if !input.concept_rows.is_empty() {
        let emb = tape.constant(params.concept_embedding.clone());
        let xc = tape.gather_rows(emb, input.concept_rows.clone())?;
        let bottom = tape.matmul(xc, w)?;
        xw = tape.vstack(xw, bottom)?;
    }
    let (alpha, _) = gat_head(&mut tape, xw, a_src, a_dst, edges)?;
    Ok(tape.value(alpha).data().to_vec())
}

/// Logits with dropout off.
pub fn predict(params: &ModelParams, input: &GraphInput) -> Result<Tensor, GnnError> {
    let mut tape = Tape::new();
    let fwd = forward::<ChaCha8Rng>(&mut tape, params, input, None)?;
    Ok(tape.value(fwd.logits).clone())
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    manifest: Vec<ManifestEntry>,
    params: ModelParams,
}

pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<(), GnnError> {
    let manifest = params
        .named_tensors()
        .into_iter()
        .map(|(name, t)| ManifestEntry {
            name,
            rows: t.rows(),
            cols: t.cols(),
        })
        .collect();
    let body = serde_json::to_string(&Checkpoint {
        manifest,
        params: params.clone(),
    })
    .map_err(|e| GnnError::Checkpoint(e.to_string()))?;
    fs::write(path, body).map_err(|source| GnnError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams, GnnError> {
    let raw = fs::read_to_string(path).map_err(|source| GnnError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let ck: Checkpoint =
        serde_json::from_str(&raw).map_err(|e| GnnError::Checkpoint(e.to_string()))?;
    let fresh = ModelParams::init(
        ck.params.spec,
        ck.params.concept_vocab.clone(),
        Tensor::zeros(ck.params.concept_vocab.len(), ck.params.spec.in_dim),
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let expected: HashMap<String, (usize, usize)> = fresh
        .named_tensors()
        .into_iter()
        .map(|(n, t)| (n, t.shape()))
        .collect();
    let actual: Vec<(String, &Tensor)> = ck.params.named_tensors();
    if actual.len() != ck.manifest.len() || actual.len() != expected.len() {
        return Err(GnnError::Checkpoint(
            "manifest does not match parameter count".into(),
        ));
    }
    for ((name, t), m) in actual.iter().zip(&ck.manifest) {
        if *name != m.name
            || t.shape() != (m.rows, m.cols)
            || expected.get(name) != Some(&t.shape())
        {
            return Err(GnnError::Checkpoint(format!("shape mismatch for {name}")));
        }
    }
    if !ck.params.all_finite() {
        return Err(GnnError::Checkpoint("non-finite parameter".into()));
    }
    Ok(ck.params)
}
