use std::path::PathBuf;

use demograph_core::{GraphError, KgError, MergeError, PromptError};
use demograph_gnn::GnnError;
use demograph_llm::GatewayError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(
        "raw {dataset} files not found in {}; expected {}",
        dir.display(),
        expected.join(", ")
    )]
    MissingRaw {
        dataset: String,
        dir: PathBuf,
        expected: Vec<String>,
    },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("micro-F1 {micro_f1} differs from accuracy {accuracy}")]
    MetricIdentity { accuracy: f64, micro_f1: f64 },

    #[error("run failed: {0}")]
    Run(String),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Kg(#[from] KgError),

    #[error(transparent)]
    Prompt(#[from] PromptError),

    #[error(transparent)]
    Merge(#[from] MergeError),

    #[error(transparent)]
    Gnn(#[from] GnnError),

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error("JSON error at {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> BenchError {
        let path = path.into();
        move |source| BenchError::Io { path, source }
    }

    /// Process exit code: 2 for anything wrong with the inputs, 3 for a
    /// failure while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_)
            | BenchError::Argument(_)
            | BenchError::MissingRaw { .. }
            | BenchError::Parse { .. }
            | BenchError::Json { .. }
            | BenchError::Prompt(_) => 2,
            BenchError::Graph(
                GraphError::Io { .. } | GraphError::Parse { .. } | GraphError::Schema(_),
            ) => 2,
            BenchError::Kg(KgError::Io { .. } | KgError::Parse { .. }) => 2,
            BenchError::Gateway(GatewayError::NotConfigured(_)) => 2,
            BenchError::Gnn(GnnError::Config(_)) | BenchError::Merge(MergeError::Config(_)) => 2,
            _ => 3,
        }
    }
}
