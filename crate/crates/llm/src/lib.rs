//! Black-box access to a chat-completion endpoint.
//!
//! The gateway never sees model weights, logits or embeddings: it sends
//! text and gets text back. Every response can be persisted as a
//! content-addressed JSON file, and the same files double as replay
//! fixtures so that downstream code runs without network access.

mod cache;
mod error;
mod gateway;
mod request;

pub use cache::{read_entry, write_entry, CacheEntry};
pub use error::GatewayError;
pub use gateway::{ChatBackend, Gateway, GatewayMode, RetryPolicy, UsageTotals};
pub use request::{ChatMessage, ChatRequest, ChatResponse, Role, Usage};

/// Environment variable holding the endpoint base URL.
pub const ENV_API_BASE: &str = "LLM_API_BASE";
/// Environment variable holding the bearer credential.
pub const ENV_API_KEY: &str = "LLM_API_KEY";
/// Environment variable pointing at a directory of replay fixtures.
pub const ENV_REPLAY_DIR: &str = "LLM_REPLAY_DIR";

/// Sampling temperature used for knowledge generation prompts.
pub const GENERATION_TEMPERATURE: f64 = 0.7;
/// Sampling temperature used for pruning prompts.
pub const PRUNING_TEMPERATURE: f64 = 0.2;
