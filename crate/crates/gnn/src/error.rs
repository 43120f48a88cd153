use std::path::PathBuf;

use demograph_core::MergeError;
use thiserror::Error;

use crate::train::EpochMetrics;

#[derive(Debug, Error)]
pub enum GnnError {
    #[error("shape error in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("tape state error: {0}")]
    State(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid training config: {0}")]
    Config(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("training diverged at epoch {epoch} (last finite epoch: {})",
        last_finite.as_ref().map_or("none".to_string(), |m| m.epoch.to_string()))]
    Divergence {
        epoch: usize,
        last_finite: Option<EpochMetrics>,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Merge(#[from] MergeError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GnnError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        GnnError::Shape {
            op,
            detail: detail.into(),
        }
    }
}
