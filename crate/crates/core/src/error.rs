use std::path::PathBuf;

use demograph_llm::GatewayError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("edge ({src}, {dst}): endpoint out of range for {num_nodes} nodes")]
    EndpointOutOfRange {
        src: usize,
        dst: usize,
        num_nodes: usize,
    },

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unbound placeholder: {0}")]
    UnboundPlaceholder(String),

    #[error("unknown placeholder {{{name}}} in {kind} template")]
    UnknownPlaceholder { kind: String, name: String },

    #[error("unbalanced brace at byte {0} in template")]
    UnbalancedBrace(usize),

    #[error("granularity {level} not available: {reason}")]
    Capability { level: String, reason: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error(transparent)]
    Prompt(#[from] PromptError),

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("invalid merge config: {0}")]
    Config(String),

    #[error("concept feature dimension {got} does not match graph feature dimension {expected}")]
    FeatureDim { expected: usize, got: usize },

    #[error(transparent)]
    Graph(#[from] GraphError),
}
