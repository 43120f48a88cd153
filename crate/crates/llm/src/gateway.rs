use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde_json::{json, Value};

use crate::cache::{read_entry, write_entry, CacheEntry};
use crate::error::GatewayError;
use crate::request::{ChatRequest, ChatResponse, Usage};
use crate::{ENV_API_BASE, ENV_API_KEY, ENV_REPLAY_DIR};

/// Anything that turns a chat request into response text.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;

    /// Completion backed by an on-disk cache directory. Backends without
    /// a cache fall through to [`ChatBackend::complete`].
    fn complete_cached(
        &self,
        request: &ChatRequest,
        cache_dir: &Path,
    ) -> Result<ChatResponse, GatewayError> {
        let _ = cache_dir;
        self.complete(request)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GatewayMode {
    /// POST to `{api_base}/chat/completions`.
    Live {
        api_base: String,
        api_key: Option<String>,
    },
    /// Serve every request from `{dir}/{digest}.json`; never touch the network.
    Replay { dir: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(8),
        }
    }
}

impl RetryPolicy {
    fn delay_before(&self, attempt: u32) -> Duration {
        let factor = 1u32 << attempt.saturating_sub(1).min(16);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UsageTotals {
    /// Requests that actually reached the endpoint and succeeded.
    pub network_calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().expect("permit lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("permit lock");
        }
        *free -= 1;
        PermitGuard { owner: self }
    }
}

struct PermitGuard<'a> {
    owner: &'a Permits,
}

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.owner.free.lock().expect("permit lock") += 1;
        self.owner.cv.notify_one();
    }
}

/// Chat-completion gateway. Safe to share between threads.
pub struct Gateway {
    mode: GatewayMode,
    retry: RetryPolicy,
    agent: ureq::Agent,
    memo: Mutex<HashMap<String, ChatResponse>>,
    permits: Permits,
    usage: Mutex<UsageTotals>,
}

impl Gateway {
    pub fn new(mode: GatewayMode) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build();
        Self {
            mode,
            retry: RetryPolicy::default(),
            agent: config.into(),
            memo: Mutex::new(HashMap::new()),
            permits: Permits::new(4),
            usage: Mutex::new(UsageTotals::default()),
        }
    }

    pub fn live(api_base: impl Into<String>, api_key: Option<String>) -> Self {
        Self::new(GatewayMode::Live {
            api_base: api_base.into(),
            api_key,
        })
    }

    pub fn replay(dir: impl Into<PathBuf>) -> Self {
        Self::new(GatewayMode::Replay { dir: dir.into() })
    }

    /// Replay mode when `LLM_REPLAY_DIR` is set, otherwise live mode from
    /// `LLM_API_BASE` / `LLM_API_KEY`.
    pub fn from_env() -> Result<Self, GatewayError> {
        if let Ok(dir) = std::env::var(ENV_REPLAY_DIR) {
            return Ok(Self::replay(dir));
        }
        let base = std::env::var(ENV_API_BASE).map_err(|_| {
            GatewayError::NotConfigured(format!("set {ENV_API_BASE} or {ENV_REPLAY_DIR}"))
        })?;
        Ok(Self::live(base, std::env::var(ENV_API_KEY).ok()))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.permits = Permits::new(n);
        self
    }

    pub fn mode(&self) -> &GatewayMode {
        &self.mode
    }

    pub fn usage(&self) -> UsageTotals {
        *self.usage.lock().expect("usage lock")
    }

    /// Sends `request`, or serves it from the in-process memo / replay
    /// fixtures. The response text is returned verbatim.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let digest = request.digest();
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&digest) {
            let mut hit = hit.clone();
            hit.cached = true;
            return Ok(hit);
        }
        let response = match &self.mode {
            GatewayMode::Replay { dir } => match read_entry(dir, &digest)? {
                Some(entry) => entry.to_response(),
                None => return Err(GatewayError::FixtureMissing { digest }),
            },
            GatewayMode::Live { api_base, api_key } => {
                let _permit = self.permits.acquire();
                let response = self.post_with_retry(api_base, api_key.as_deref(), request)?;
                let mut usage = self.usage.lock().expect("usage lock");
                usage.network_calls += 1;
                usage.prompt_tokens += response.usage.prompt_tokens;
                usage.completion_tokens += response.usage.completion_tokens;
                response
            }
        };
        self.memo
            .lock()
            .expect("memo lock")
            .insert(digest, response.clone());
        Ok(response)
    }

    /// Like [`Gateway::complete`], but first consults `cache_dir` and
    /// persists misses there. A corrupt cache file is logged and
    /// regenerated.
    pub fn complete_cached(
        &self,
        request: &ChatRequest,
        cache_dir: &Path,
    ) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let digest = request.digest();
        match read_entry(cache_dir, &digest) {
            Ok(Some(entry)) => return Ok(entry.to_response()),
            Ok(None) => {}
            Err(GatewayError::MalformedResponse(msg)) => {
                warn!("discarding corrupt cache entry: {msg}");
            }
            Err(e) => return Err(e),
        }
        let response = self.complete(request)?;
        write_entry(cache_dir, &CacheEntry::new(request, &response))?;
        Ok(response)
    }

    fn post_with_retry(
        &self,
        api_base: &str,
        api_key: Option<&str>,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let max = self.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.post_once(api_base, api_key, request) {
                Ok(r) => return Ok(r),
                Err(e) if e.is_retryable() && attempt < max => {
                    let delay = self.retry.delay_before(attempt);
                    debug!("attempt {attempt}/{max} failed ({e}); retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(GatewayError::Transport { message, .. }) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once(
        &self,
        api_base: &str,
        api_key: Option<&str>,
        request: &ChatRequest,
    ) -> Result<ChatResponse, GatewayError> {
        let url = format!("{}/chat/completions", api_base.trim_end_matches('/'));
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| json!({"role": m.role.as_str(), "content": m.content}))
            .collect();
        let body = json!({
            "model": request.model_name,
            "messages": messages,
            "temperature": request.sampling_temperature,
            "max_tokens": request.max_tokens,
        });
        let transport = |e: ureq::Error| GatewayError::Transport {
            attempts: 1,
            message: e.to_string(),
        };

        let mut call = self.agent.post(&url);
        if let Some(key) = api_key.filter(|k| !k.is_empty()) {
            call = call.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = call.send_json(&body).map_err(transport)?;
        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(GatewayError::RateLimited { retry_after });
        }
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Http { status, body: text });
        }
        parse_completion_body(&text)
    }
}

impl ChatBackend for Gateway {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        Gateway::complete(self, request)
    }

    fn complete_cached(
        &self,
        request: &ChatRequest,
        cache_dir: &Path,
    ) -> Result<ChatResponse, GatewayError> {
        Gateway::complete_cached(self, request, cache_dir)
    }
}

fn parse_completion_body(body: &str) -> Result<ChatResponse, GatewayError> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            GatewayError::MalformedResponse("missing choices[0].message.content".into())
        })?
        .to_string();
    let count = |p: &str| v.pointer(p).and_then(Value::as_u64).unwrap_or(0);
    Ok(ChatResponse {
        text,
        usage: Usage {
            prompt_tokens: count("/usage/prompt_tokens"),
            completion_tokens: count("/usage/completion_tokens"),
        },
        cached: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(350),
        };
        assert_eq!(p.delay_before(1), Duration::from_millis(100));
        assert_eq!(p.delay_before(2), Duration::from_millis(200));
        assert_eq!(p.delay_before(3), Duration::from_millis(350));
    }

    #[test]
    fn parses_completion_body() {
        let r = parse_completion_body(
            r#"{"choices":[{"message":{"role":"assistant","content":"[a, r, b]"}}],"usage":{"prompt_tokens":3,"completion_tokens":5}}"#,
        )
        .unwrap();
        assert_eq!(r.text, "[a, r, b]");
        assert_eq!(r.usage.completion_tokens, 5);
        assert!(!r.cached);
        assert!(parse_completion_body(r#"{"choices":[]}"#).is_err());
    }
}
