use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// A single chat-completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<ChatMessage>,
    pub sampling_temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    /// A request carrying one user message.
    pub fn user(
        model_name: impl Into<String>,
        prompt: impl Into<String>,
        temperature: f64,
    ) -> Self {
        Self {
            model_name: model_name.into(),
            messages: vec![ChatMessage::user(prompt)],
            sampling_temperature: temperature,
            max_tokens: 4096,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(GatewayError::InvalidRequest(
                "at least one user message is required".into(),
            ));
        }
        if let Some(i) = self.messages.iter().position(|m| m.content.is_empty()) {
            return Err(GatewayError::InvalidRequest(format!(
                "message {i} has empty content"
            )));
        }
        if !self.sampling_temperature.is_finite() || self.sampling_temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(format!(
                "sampling temperature must be finite and >= 0, got {}",
                self.sampling_temperature
            )));
        }
        Ok(())
    }

    /// Canonical serialization of the fields that identify a response:
    /// model, messages and temperature, keys in lexicographic order.
    /// `max_tokens` is deliberately excluded.
    pub fn canonical_json(&self) -> String {
        let enc = |s: &str| serde_json::to_string(s).expect("string serialization");
        let messages: Vec<String> = self
            .messages
            .iter()
            .map(|m| {
                format!(
                    "{{\"content\":{},\"role\":{}}}",
                    enc(&m.content),
                    enc(m.role.as_str())
                )
            })
            .collect();
        let temperature =
            serde_json::to_string(&self.sampling_temperature).expect("f64 serialization");
        format!(
            "{{\"messages\":[{}],\"model\":{},\"temperature\":{}}}",
            messages.join(","),
            enc(&self.model_name),
            temperature
        )
    }

    /// Hex SHA-256 of [`ChatRequest::canonical_json`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_json().as_bytes());
        hex::encode(hash)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Usage,
    /// True when served from memory, disk cache or a replay fixture.
    pub cached: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(t: f64) -> ChatRequest {
        ChatRequest::user("m", "hello", t)
    }

    #[test]
    fn digest_is_deterministic() {
        assert_eq!(req(0.7).digest(), req(0.7).digest());
        assert_eq!(req(0.7).digest().len(), 64);
    }

    #[test]
    fn temperature_changes_digest() {
        assert_ne!(req(0.7).digest(), req(0.2).digest());
    }

    #[test]
    fn max_tokens_does_not_change_digest() {
        let mut a = req(0.7);
        a.max_tokens = 10;
        assert_eq!(a.digest(), req(0.7).digest());
    }

    #[test]
    fn field_order_does_not_change_digest() {
        let a: ChatRequest = serde_json::from_str(
            r#"{"model_name":"m","messages":[{"role":"user","content":"x"}],"sampling_temperature":0.5,"max_tokens":9}"#,
        )
        .unwrap();
        let b: ChatRequest = serde_json::from_str(
            r#"{"max_tokens":9,"sampling_temperature":0.5,"messages":[{"content":"x","role":"user"}],"model_name":"m"}"#,
        )
        .unwrap();
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn validation() {
        assert!(req(0.0).validate().is_ok());
        let mut r = req(0.1);
        r.messages = vec![ChatMessage::system("s")];
        assert!(r.validate().is_err());
        let mut r = req(0.1);
        r.messages[0].content.clear();
        assert!(r.validate().is_err());
        assert!(req(-1.0).validate().is_err());
        assert!(req(f64::NAN).validate().is_err());
    }
}
