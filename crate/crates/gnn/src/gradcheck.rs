//! Central finite-difference comparison against tape gradients.

use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::error::GnnError;
use crate::model::{forward, GraphInput, ModelParams};
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Below this combined norm gradients are compared in absolute terms.
/// Exactly-zero gradients (e.g. a destination score whose softmax segment
/// never crosses the leaky-ReLU kink) would otherwise divide rounding
/// noise by rounding noise.
pub const SCALE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    /// Per parameter tensor: `|a - n| / max(|a| + |n|, SCALE_FLOOR)` in L2
    /// norm.
    pub relative_errors: Vec<(String, f64)>,
}

impl GradCheck {
    pub fn max_relative_error(&self) -> f64 {
        self.relative_errors
            .iter()
            .map(|(_, e)| *e)
            .fold(0.0, f64::max)
    }
}

fn loss_value(
    params: &ModelParams,
    input: &GraphInput,
    rows: &Rc<Vec<usize>>,
    labels: &Rc<Vec<usize>>,
    tau: f64,
) -> Result<f64, GnnError> {
    let mut tape = Tape::new();
    let fwd = forward::<ChaCha8Rng>(&mut tape, params, input, None)?;
    let loss = tape.softmax_cross_entropy(fwd.logits, rows.clone(), labels.clone(), tau)?;
    Ok(tape.value(loss).data()[0])
}

/// Analytic gradients of the masked loss, in parameter order.
pub fn analytic_gradients(
    params: &ModelParams,
    input: &GraphInput,
    rows: &[usize],
    labels: &[usize],
    tau: f64,
) -> Result<Vec<Tensor>, GnnError> {
    let mut tape = Tape::new();
    let fwd = forward::<ChaCha8Rng>(&mut tape, params, input, None)?;
    let loss = tape.softmax_cross_entropy(
        fwd.logits,
        Rc::new(rows.to_vec()),
        Rc::new(labels.to_vec()),
        tau,
    )?;
    tape.backward(loss)?;
    Ok(fwd
        .params
        .iter()
        .map(|&v| {
            tape.take_grad(v)
                .unwrap_or_else(|| Tensor::zeros(tape.value(v).rows(), tape.value(v).cols()))
        })
        .collect())
}

/// Compares tape gradients with `(L(p + eps) - L(p - eps)) / 2 eps` for
/// every scalar parameter.
pub fn check_gradients(
    params: &ModelParams,
    input: &GraphInput,
    rows: &[usize],
    labels: &[usize],
    tau: f64,
    eps: f64,
) -> Result<GradCheck, GnnError> {
    let analytic = analytic_gradients(params, input, rows, labels, tau)?;
    let rows = Rc::new(rows.to_vec());
    let labels = Rc::new(labels.to_vec());
    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let mut probe = params.clone();
    let mut relative_errors = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let len = analytic[k].len();
        let mut numeric = vec![0.0; len];
        for (j, slot) in numeric.iter_mut().enumerate() {
            let original = probe.tensors_mut()[k].data()[j];
            probe.tensors_mut()[k].data_mut()[j] = original + eps;
            let plus = loss_value(&probe, input, &rows, &labels, tau)?;
            probe.tensors_mut()[k].data_mut()[j] = original - eps;
            let minus = loss_value(&probe, input, &rows, &labels, tau)?;
            probe.tensors_mut()[k].data_mut()[j] = original;
            *slot = (plus - minus) / (2.0 * eps);
        }
        let a = analytic[k].data();
        let diff: f64 = a
            .iter()
            .zip(&numeric)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = analytic[k].norm() + numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        relative_errors.push((name, diff / scale.max(SCALE_FLOOR)));
    }
    Ok(GradCheck { relative_errors })
}

/// A small randomized problem for gradient checking: a few original
/// nodes, some concept nodes wired in, 1-2 layers, random temperature.
pub struct GradInstance {
    pub params: ModelParams,
    pub input: GraphInput,
    pub rows: Vec<usize>,
    pub labels: Vec<usize>,
    pub tau: f64,
}

pub fn random_instance<R: rand::Rng + ?Sized>(
    architecture: crate::model::Architecture,
    rng: &mut R,
) -> Result<GradInstance, GnnError> {
    use demograph_core::{DenseMatrix, Graph, GraphParts, NodeOrigin, Splits};
    use rand_distr::{Distribution, Normal};

    let n = rng.random_range(3..8);
    let k = rng.random_range(0..3);
    let f = rng.random_range(2..5);
    let c = rng.random_range(2..4);
    let layers = rng.random_range(1..3);
    let total = n + k;
    let mut edges = Vec::new();
    for _ in 0..rng.random_range(n..3 * n) {
        edges.push((rng.random_range(0..total), rng.random_range(0..total)));
    }
    for concept in n..total {
        edges.push((concept, rng.random_range(0..n)));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let features: Vec<f64> = (0..n * f).map(|_| normal.sample(rng)).collect();
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
    let mut node_labels: Vec<Option<usize>> = labels.iter().copied().map(Some).collect();
    node_labels.resize(total, None);
    let mut origin = vec![NodeOrigin::Original; n];
    origin.resize(total, NodeOrigin::Concept);
    let graph = Graph::new(GraphParts {
        features: DenseMatrix::zeros(total, 0),
        labels: node_labels,
        edges,
        splits: Splits::default(),
        origin,
    })
    .map_err(|e| GnnError::Argument(e.to_string()))?;

    let vocab: Vec<String> = (0..k + 1).map(|i| format!("concept {i}")).collect();
    let emb: Vec<f64> = (0..vocab.len() * f).map(|_| normal.sample(rng)).collect();
    let concept_rows: Vec<usize> = (0..k).map(|_| rng.random_range(0..vocab.len())).collect();
    let spec = crate::model::ModelSpec {
        architecture,
        in_dim: f,
        hidden: 4,
        num_classes: c,
        layers,
        heads: 2,
    };
    let mut params = ModelParams::init(
        spec,
        vocab.clone(),
        Tensor::from_vec(vocab.len(), f, emb)?,
        rng,
    )?;
    // non-zero biases so every parameter has a generic gradient
    for layer in &mut params.layers {
        layer
            .bias
            .data_mut()
            .iter_mut()
            .for_each(|b| *b = 0.1 * normal.sample(rng));
    }
    let input = GraphInput::new(
        architecture,
        &graph,
        Rc::new(Tensor::from_vec(n, f, features)?),
        concept_rows,
    )?;
    let rows: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
    let rows = if rows.is_empty() { vec![0] } else { rows };
    let labels = rows.iter().map(|&i| labels[i]).collect();
    Ok(GradInstance {
        params,
        input,
        rows,
        labels,
        tau: rng.random_range(0.5..1.0),
    })
}
