//! Dense/sparse GNN training in `f64` with a small reverse-mode tape.
//!
//! GCN and GAT layers, temperature-scaled softmax cross-entropy, Adam and
//! an epoch loop that re-merges concept nodes into the graph every epoch.

pub mod error;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::GnnError;
pub use gradcheck::{check_gradients, random_instance, GradCheck, GradInstance};
pub use loss::{cross_entropy, softmax_rows, temperature, temperature_with, TemperatureSchedule};
pub use model::{
    forward, gat_attention, load_checkpoint, predict, save_checkpoint, Architecture, Dropout,
    GraphInput, ModelParams, ModelSpec,
};
pub use optim::{adam_step, AdamConfig, AdamState, WeightDecay};
pub use tape::{EdgeIndex, Tape, Var};
pub use tensor::Tensor;
pub use train::{
    accuracy, metrics_to_csv, train, write_metrics_csv, EpochMetrics, TrainConfig, TrainOutcome,
};
