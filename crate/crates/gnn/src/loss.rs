use serde::{Deserialize, Serialize};

use crate::error::GnnError;
use crate::tape::softmax_row;
use crate::tensor::Tensor;

pub const MIN_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureSchedule {
    /// `max(0.5, exp(-r p))`: starts at 1 and decays to the floor.
    #[default]
    Decreasing,
    /// `max(0.5, exp(r p))`: grows from 1; the floor never binds.
    Literal,
}

/// Softmax temperature for training epoch `epoch`.
pub fn temperature(epoch: usize, rate: f64) -> f64 {
    temperature_with(epoch, rate, TemperatureSchedule::Decreasing)
}

pub fn temperature_with(epoch: usize, rate: f64, schedule: TemperatureSchedule) -> f64 {
    let exponent = rate * epoch as f64;
    let raw = match schedule {
        TemperatureSchedule::Decreasing => (-exponent).exp(),
        TemperatureSchedule::Literal => exponent.exp(),
    };
    raw.max(MIN_TEMPERATURE)
}

/// Row-wise softmax of `logits / tau`.
pub fn softmax_rows(logits: &Tensor, tau: f64) -> Tensor {
    let mut out = Tensor::zeros(logits.rows(), logits.cols());
    for i in 0..logits.rows() {
        let (p, _) = softmax_row(logits.row(i), tau);
        out.row_mut(i).copy_from_slice(&p);
    }
    out
}

/// Mean over `mask` of `-log softmax(logits[i] / tau)[labels[i]]`.
/// `labels` is indexed by node.
pub fn cross_entropy(
    logits: &Tensor,
    labels: &[Option<usize>],
    mask: &[usize],
    tau: f64,
) -> Result<f64, GnnError> {
    if mask.is_empty() {
        return Err(GnnError::Argument("empty loss mask".into()));
    }
    let mut total = 0.0;
    for &i in mask {
        let y = labels
            .get(i)
            .copied()
            .flatten()
            .ok_or_else(|| GnnError::Argument(format!("node {i} has no label")))?;
        if i >= logits.rows() || y >= logits.cols() {
            return Err(GnnError::shape(
                "cross_entropy",
                format!("node {i}, label {y}"),
            ));
        }
        let (_, lse) = softmax_row(logits.row(i), tau);
        total += lse - logits.get(i, y) / tau;
    }
    Ok(total / mask.len() as f64)
}
