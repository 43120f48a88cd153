//! Full-batch training with per-epoch graph views, temperature-scaled
//! loss and early stopping on validation accuracy.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::rc::Rc;

use demograph_core::merge::concept_vocabulary;
use demograph_core::{
    epoch_view, init_concept_features, Graph, KnowledgeGraph, MergeConfig, MergeMode,
};
use log::{debug, info};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::GnnError;
use crate::loss::{cross_entropy, temperature_with, TemperatureSchedule};
use crate::model::{forward, predict, Architecture, Dropout, GraphInput, ModelParams, ModelSpec};
use crate::optim::{adam_step, AdamConfig, AdamState, WeightDecay};
use crate::tape::Tape;
use crate::tensor::Tensor;

const INIT_STREAM: u64 = u64::MAX;
const DROPOUT_STREAM: u64 = u64::MAX - 1;
const CONCEPT_STREAM: u64 = u64::MAX - 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub weight_decay_mode: WeightDecay,
    pub max_epochs: usize,
    /// Non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub anneal_rate: f64,
    pub temperature_schedule: TemperatureSchedule,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Gcn,
            layers: 2,
            hidden: 64,
            heads: 8,
            dropout: 0.1,
            lr: 5e-5,
            weight_decay: 1e-5,
            weight_decay_mode: WeightDecay::Decoupled,
            max_epochs: 1000,
            patience: 100,
            anneal_rate: 0.01,
            temperature_schedule: TemperatureSchedule::Decreasing,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GnnError> {
        let bad = |m: &str| Err(GnnError::Config(m.to_string()));
        if self.layers == 0 {
            return bad("layers must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight decay must be >= 0");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be >= 1");
        }
        if !(self.anneal_rate >= 0.0 && self.anneal_rate.is_finite()) {
            return bad("anneal rate must be >= 0");
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            decay_mode: self.weight_decay_mode,
            ..AdamConfig::new(self.lr, self.weight_decay)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    /// Validation loss at unit temperature.
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the best validation epoch.
    pub params: ModelParams,
    pub metrics: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub test_acc: f64,
    /// Predicted class per node of the test split, at the best epoch.
    pub test_predictions: Vec<usize>,
    pub val_predictions: Vec<usize>,
    pub stopped_early: bool,
}

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let correct = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count();
    correct as f64 / labels.len() as f64
}

fn split_labels(graph: &Graph, rows: &[usize]) -> Vec<usize> {
    rows.iter()
        .map(|&i| graph.labels()[i].expect("split nodes are labeled"))
        .collect()
}

struct Views<'a> {
    base: &'a Graph,
    kgs: &'a [KnowledgeGraph],
    merge: Option<&'a MergeConfig>,
    architecture: Architecture,
    features: Rc<Tensor>,
    vocab_index: HashMap<String, usize>,
    cached: Option<GraphInput>,
}

impl Views<'_> {
    fn input(&mut self, epoch: usize) -> Result<GraphInput, GnnError> {
        if let Some(input) = &self.cached {
            return Ok(input.clone());
        }
        let input = match self.merge {
            Some(merge) if !self.kgs.is_empty() => {
                let view = epoch_view(self.base, self.kgs, merge, epoch as u64)?;
                let rows = view
                    .concept_index_map
                    .keys()
                    .map(|c| self.vocab_index[c])
                    .collect();
                GraphInput::new(self.architecture, &view.graph, self.features.clone(), rows)?
            }
            _ => GraphInput::new(self.architecture, self.base, self.features.clone(), vec![])?,
        };
        let reusable = match self.merge {
            Some(m) if !self.kgs.is_empty() => m.mode == MergeMode::Static,
            _ => true,
        };
        if reusable {
            self.cached = Some(input.clone());
        }
        Ok(input)
    }
}

struct Best {
    epoch: usize,
    val_acc: f64,
    val_loss: f64,
    params: ModelParams,
    test_predictions: Vec<usize>,
    val_predictions: Vec<usize>,
}

/// Trains on `base`, merging `kgs` into a fresh view every epoch when
/// `merge` is given (or once, in static mode).
pub fn train(
    base: &Graph,
    kgs: &[KnowledgeGraph],
    merge: Option<&MergeConfig>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, GnnError> {
    cfg.validate()?;
    if !kgs.is_empty() && merge.is_none() {
        return Err(GnnError::Config(
            "knowledge graphs given without a merge config".into(),
        ));
    }
    let splits = base.splits();
    for (name, rows) in [
        ("train", &splits.train),
        ("val", &splits.val),
        ("test", &splits.test),
    ] {
        if rows.is_empty() {
            return Err(GnnError::Config(format!("{name} split is empty")));
        }
    }
    let train_rows = Rc::new(splits.train.clone());
    let train_labels = Rc::new(split_labels(base, &splits.train));
    let val_labels = split_labels(base, &splits.val);
    let test_labels = split_labels(base, &splits.test);

    let augmenting = merge.is_some() && !kgs.is_empty();
    let vocab = if augmenting {
        concept_vocabulary(kgs)
    } else {
        vec![]
    };
    let in_dim = base.num_features();
    // separate streams so weight init does not depend on the vocabulary
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut concept_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    concept_rng.set_stream(CONCEPT_STREAM);
    let embedding = Tensor::from(&init_concept_features(
        vocab.len(),
        in_dim,
        &mut concept_rng,
    ));
    let spec = ModelSpec {
        architecture: cfg.architecture,
        in_dim,
        hidden: cfg.hidden,
        num_classes: base.num_classes(),
        layers: cfg.layers,
        heads: cfg.heads,
    };
    let mut params = ModelParams::init(spec, vocab.clone(), embedding, &mut init_rng)?;
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(DROPOUT_STREAM);

    let mut views = Views {
        base,
        kgs,
        merge,
        architecture: cfg.architecture,
        features: Rc::new(Tensor::from(base.features())),
        vocab_index: vocab
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect(),
        cached: None,
    };

    let adam = cfg.adam();
    let mut state = AdamState::new();
    let mut metrics: Vec<EpochMetrics> = Vec::new();
    let mut best: Option<Best> = None;
    let mut bad_epochs = 0usize;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let diverged = |metrics: &[EpochMetrics]| GnnError::Divergence {
            epoch,
            last_finite: metrics.last().cloned(),
        };
        let guard = |e: GnnError, metrics: &[EpochMetrics]| match e {
            GnnError::NonFinite { op } => {
                debug!("non-finite value from {op} at epoch {epoch}");
                diverged(metrics)
            }
            other => other,
        };
        let input = views.input(epoch)?;
        let tau = temperature_with(epoch, cfg.anneal_rate, cfg.temperature_schedule);

        let mut tape = Tape::new();
        let mut dropout = Dropout {
            rate: cfg.dropout,
            rng: &mut dropout_rng,
        };
        let fwd = forward(&mut tape, &params, &input, Some(&mut dropout))
            .map_err(|e| guard(e, &metrics))?;
        let loss = tape
            .softmax_cross_entropy(fwd.logits, train_rows.clone(), train_labels.clone(), tau)
            .map_err(|e| guard(e, &metrics))?;
        let train_loss = tape.value(loss).data()[0];
        tape.backward(loss)?;
        let grads: Vec<Tensor> = fwd
            .params
            .iter()
            .map(|&v| {
                tape.take_grad(v)
                    .unwrap_or_else(|| Tensor::zeros(tape.value(v).rows(), tape.value(v).cols()))
            })
            .collect();
        adam_step(&mut params.tensors_mut(), &grads, &mut state, &adam)?;
        if !params.all_finite() {
            return Err(diverged(&metrics));
        }

        let logits = predict(&params, &input).map_err(|e| guard(e, &metrics))?;
        let preds = logits.argmax_rows();
        let val_preds: Vec<usize> = splits.val.iter().map(|&i| preds[i]).collect();
        let test_preds: Vec<usize> = splits.test.iter().map(|&i| preds[i]).collect();
        let val_acc = accuracy(&val_preds, &val_labels);
        let test_acc = accuracy(&test_preds, &test_labels);
        let val_loss = cross_entropy(&logits, base.labels(), &splits.val, 1.0)?;
        metrics.push(EpochMetrics {
            epoch,
            train_loss,
            val_loss,
            val_acc,
            test_acc,
            tau,
        });
        debug!(
            "epoch {epoch}: loss {train_loss:.4} val {val_acc:.4} test {test_acc:.4} tau {tau:.3}"
        );

        // accuracy saturates quickly on small validation sets; ties go to
        // the lower validation loss
        let improved = best
            .as_ref()
            .is_none_or(|b| val_acc > b.val_acc || (val_acc == b.val_acc && val_loss < b.val_loss));
        if improved {
            best = Some(Best {
                epoch,
                val_acc,
                val_loss,
                params: params.clone(),
                test_predictions: test_preds,
                val_predictions: val_preds,
            });
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let Best {
        epoch: best_epoch,
        val_acc: best_val_acc,
        params: best_params,
        test_predictions,
        val_predictions,
        ..
    } = best.expect("at least one epoch ran");
    let test_acc = accuracy(&test_predictions, &test_labels);
    info!(
        "best epoch {best_epoch}: val {best_val_acc:.4} test {test_acc:.4} ({} epochs run)",
        metrics.len()
    );
    Ok(TrainOutcome {
        params: best_params,
        metrics,
        best_epoch,
        best_val_acc,
        test_acc,
        test_predictions,
        val_predictions,
        stopped_early,
    })
}

pub fn metrics_to_csv(metrics: &[EpochMetrics]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for m in metrics {
        writer.serialize(m).expect("in-memory csv write");
    }
    String::from_utf8(writer.into_inner().expect("flush to memory")).expect("utf-8 csv")
}

pub fn write_metrics_csv(metrics: &[EpochMetrics], path: &Path) -> Result<(), GnnError> {
    fs::write(path, metrics_to_csv(metrics)).map_err(|source| GnnError::Io {
        path: path.to_path_buf(),
        source,
    })
}
