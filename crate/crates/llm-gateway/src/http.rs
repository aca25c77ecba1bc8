//! HTTP chat-completion backend.
//!
//! Speaks the widely used wire format: POST `{base_url}/chat/completions`
//! with `{model, messages[], temperature, n, max_tokens}`, replies parsed
//! from `choices[].message.content`. The API key comes from an environment
//! variable named in the config; it never lives in config files.

use serde::Deserialize;

use crate::backend::ChatBackend;
use crate::{CompletionRequest, GatewayError};

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            api_key_env: None,
            timeout_secs: 120,
        }
    }
}

pub struct HttpBackend {
    name: String,
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(name: impl Into<String>, config: HttpConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Http {
                status: None,
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(Self { name: name.into(), config, client })
    }
}

impl ChatBackend for HttpBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<Vec<String>, GatewayError> {
        let url = format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.client.post(&url).json(request);
        if let Some(var) = &self.config.api_key_env {
            if let Ok(key) = std::env::var(var) {
                req = req.bearer_auth(key);
            }
        }
        let response = req.send().map_err(|e| GatewayError::Http {
            status: None,
            message: e.to_string(),
            // Connection/timeout problems are worth retrying.
            retryable: e.is_timeout() || e.is_connect() || e.is_request(),
        })?;
        let status = response.status();
        if !status.is_success() {
            let code = status.as_u16();
            let body = response.text().unwrap_or_default();
            return Err(GatewayError::Http {
                status: Some(code),
                message: body.chars().take(200).collect(),
                retryable: code == 429 || (500..=599).contains(&code),
            });
        }
        let wire: WireResponse = response.json().map_err(|e| GatewayError::Http {
            status: Some(status.as_u16()),
            message: format!("malformed response body: {e}"),
            retryable: false,
        })?;
        if wire.choices.is_empty() {
            return Err(GatewayError::Http {
                status: Some(status.as_u16()),
                message: "response carried no choices".into(),
                retryable: false,
            });
        }
        Ok(wire.choices.into_iter().map(|c| c.message.content).collect())
    }
}
