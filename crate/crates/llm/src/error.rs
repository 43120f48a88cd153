use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid chat request: {0}")]
    InvalidRequest(String),

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("rate limited by endpoint (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },

    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),

    #[error("no replay fixture for request digest {digest}")]
    FixtureMissing { digest: String },

    #[error("gateway not configured: {0}")]
    NotConfigured(String),

    #[error("cache I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl GatewayError {
    /// Whether a retry of the same request may succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Transport { .. } => true,
            GatewayError::Http { status, .. } => *status >= 500,
            _ => false,
        }
    }
}
