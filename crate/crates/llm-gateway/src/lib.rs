//! Backend-agnostic chat-completion access.
//!
//! Everything LLM-shaped in the pipeline goes through [`Gateway`], which
//! wraps one of three backend families behind the same trait:
//!
//! - [`HttpBackend`]: the common chat-completion wire format over HTTP,
//!   with retry/backoff handled by the gateway;
//! - [`ScriptedBackend`] / [`FnBackend`]: deterministic canned replies for
//!   tests and offline pipeline runs;
//! - [`ReplayBackend`] + [`RecordingBackend`]: record a live session to a
//!   JSONL transcript and replay it byte-identically later.
//!
//! The full pipeline runs to completion against scripted backends with
//! zero network access.

mod backend;
mod gateway;
mod http;
mod ledger;
mod replay;

pub use backend::{ChatBackend, FnBackend, Pattern, ScriptedBackend};
pub use gateway::{Gateway, GatewaySet, RetryPolicy};
pub use http::{HttpBackend, HttpConfig};
pub use ledger::{BackendCounters, UsageLedger};
pub use replay::{read_transcript, RecordingBackend, ReplayBackend, TranscriptLine};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway exhausted after {attempts} attempts: {last_error}")]
    GatewayExhausted { attempts: u32, last_error: String },
    #[error("scripted backend has no rule for prompt: {preview:?}")]
    UnmatchedPrompt { preview: String },
    #[error("replay transcript diverged: expected request {expected}, got {got}")]
    TranscriptDivergence { expected: String, got: String },
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("http error{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Http {
        status: Option<u16>,
        message: String,
        retryable: bool,
    },
    #[error("transcript io: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript parse: {0}")]
    Json(#[from] serde_json::Error),
}

impl GatewayError {
    /// Whether the gateway should retry the call.
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Http { retryable: true, .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }

    pub fn tool(content: impl Into<String>) -> Self {
        Self { role: Role::Tool, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub n: u32,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(model: impl Into<String>, messages: Vec<ChatMessage>) -> Self {
        Self {
            model: model.into(),
            messages,
            temperature: 0.7,
            n: 1,
            max_tokens: 1024,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_n(mut self, n: u32) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.n < 1 {
            return Err(GatewayError::InvalidRequest("n must be at least 1".into()));
        }
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be positive".into()));
        }
        for m in &self.messages {
            if matches!(m.role, Role::User | Role::Assistant) && m.content.is_empty() {
                return Err(GatewayError::InvalidRequest(format!(
                    "empty content for {:?} message",
                    m.role
                )));
            }
        }
        Ok(())
    }

    /// All message contents joined; what scripted patterns match against.
    pub fn flat_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Stable hash used by the recording/replay transcripts.
    pub fn request_hash(&self) -> String {
        let json = serde_json::to_string(self).expect("request serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// Rough token estimate used by the usage ledger (length / 4).
pub fn estimate_tokens(text: &str) -> u64 {
    (text.len() / 4) as u64
}
