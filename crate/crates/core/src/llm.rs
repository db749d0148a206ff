//! Minimal client for OpenAI-compatible chat and embedding endpoints.
//!
//! Every remote backend in the engine is optional and has a deterministic
//! fallback; this client only has to report failures, never recover them.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("http transport: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub url: String,
    pub model: String,
    /// Name of the environment variable holding a bearer token, if any.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    20
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    endpoint: String,
    api_key: Option<String>,
    inner: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, LlmError> {
        let inner = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(HttpClient {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            api_key,
            inner,
        })
    }

    pub fn from_config(cfg: &EndpointConfig) -> Result<Self, LlmError> {
        let key = cfg
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok());
        Self::new(cfg.url.clone(), key, Duration::from_secs(cfg.timeout_secs))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, LlmError> {
        let mut req = self.inner.post(format!("{}{path}", self.endpoint)).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Status {
                status: status.as_u16(),
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| LlmError::Shape(e.to_string()))
    }

    /// Single-turn chat completion; returns the first choice's content.
    pub fn chat(&self, model: &str, system: &str, user: &str) -> Result<String, LlmError> {
        let body = json!({
            "model": model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let value = self.post("/chat/completions", &body)?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Shape("missing choices[0].message.content".into()))
    }

    pub fn embedding(&self, model: &str, text: &str) -> Result<Vec<f64>, LlmError> {
        let value = self.post("/embeddings", &json!({"model": model, "input": text}))?;
        value["data"][0]["embedding"]
            .as_array()
            .ok_or_else(|| LlmError::Shape("missing data[0].embedding".into()))?
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| LlmError::Shape("non-numeric embedding".into())))
            .collect()
    }
}

/// Extracts the first `{...}` JSON object from model output.
pub fn extract_json_object(text: &str) -> Option<serde_json::Value> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    if end < start {
        return None;
    }
    serde_json::from_str(&text[start..=end]).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_extraction() {
        let v = extract_json_object("Sure! {\"value\": [\"rainfall\"], \"reasoning\": \"x\"} done").unwrap();
        assert_eq!(v["value"][0], "rainfall");
        assert!(extract_json_object("no json").is_none());
        assert!(extract_json_object("} {").is_none());
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        let c = HttpClient::new("http://127.0.0.1:9", None, Duration::from_millis(200)).unwrap();
        assert!(matches!(c.chat("m", "s", "u"), Err(LlmError::Transport(_))));
    }
}
