//! Model clients: an OpenAI-compatible HTTP client and a scripted replay.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::message::{ChatMessage, Part, Role};

pub const DEFAULT_TEMPERATURE: f64 = 0.7;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("transport failure after {attempts} attempt(s), last status {status:?}: {message}")]
    Transport { status: Option<u16>, message: String, attempts: u32 },
    #[error("request timed out after {attempts} attempt(s): {message}")]
    Timeout { message: String, attempts: u32 },
    #[error("cannot attach image {path}: {source}")]
    Image { path: PathBuf, source: std::io::Error },
    #[error("malformed model response: {0}")]
    Response(String),
    #[error("scripted model has no replies left")]
    Exhausted,
    #[error("{agent} reply unusable after a reprompt: {message}")]
    Unparseable { agent: &'static str, message: String },
    #[error("{0}")]
    Precondition(String),
    #[error("fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
}

/// Anything that answers a chat conversation with assistant text.
pub trait ChatModel {
    fn chat(&mut self, messages: &[ChatMessage]) -> Result<String, AgentError>;
}

/// Connection settings for one OpenAI-compatible chat endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding a bearer token, if the server wants one.
    #[serde(default)]
    pub api_key_env: Option<String>,
    pub timeout_secs: f64,
    pub max_retries: u32,
    /// Delay before the first retry; doubled for each later one.
    pub backoff_ms: u64,
    pub temperature: f64,
}

impl ModelEndpoint {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: None,
            timeout_secs: 300.0,
            max_retries: 3,
            backoff_ms: 1000,
            temperature: DEFAULT_TEMPERATURE,
        }
    }

    pub fn completions_url(&self) -> String {
        let base = self.base_url.trim_end_matches('/');
        if base.ends_with("/v1") {
            format!("{base}/chat/completions")
        } else {
            format!("{base}/v1/chat/completions")
        }
    }

    /// Total sleep between attempts when every attempt fails.
    pub fn backoff_total(&self) -> Duration {
        (0..self.max_retries).map(|k| self.backoff(k)).sum()
    }

    fn backoff(&self, retry: u32) -> Duration {
        Duration::from_millis(self.backoff_ms.saturating_mul(1u64 << retry.min(20)))
    }
}

fn encode_part(part: &Part) -> Result<Value, AgentError> {
    Ok(match part {
        Part::Text { text } => json!({"type": "text", "text": text}),
        Part::Image { path } => {
            let bytes = fs::read(path).map_err(|source| AgentError::Image { path: path.clone(), source })?;
            let data = base64::engine::general_purpose::STANDARD.encode(bytes);
            json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{data}")}})
        }
    })
}

/// Request body for `messages` in the chat-completions format.
pub fn request_body(endpoint: &ModelEndpoint, messages: &[ChatMessage]) -> Result<Value, AgentError> {
    let mut out = Vec::with_capacity(messages.len());
    for m in messages {
        let role = match m.role {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        };
        let content = if m.images().next().is_none() {
            Value::String(m.text())
        } else {
            Value::Array(m.parts.iter().map(encode_part).collect::<Result<_, _>>()?)
        };
        out.push(json!({"role": role, "content": content}));
    }
    Ok(json!({"model": endpoint.model, "messages": out, "temperature": endpoint.temperature}))
}

fn response_text(body: &Value) -> Result<String, AgentError> {
    let content = body
        .pointer("/choices/0/message/content")
        .ok_or_else(|| AgentError::Response(format!("no choices[0].message.content in {body}")))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => {
            Ok(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect::<Vec<_>>().join(""))
        }
        other => Err(AgentError::Response(format!("unexpected content {other}"))),
    }
}

enum Failure {
    Retry { status: Option<u16>, message: String, timeout: bool },
    Fatal(AgentError),
}

/// Blocking client for `POST /v1/chat/completions`.
pub struct HttpChatModel {
    endpoint: ModelEndpoint,
    client: reqwest::blocking::Client,
}

impl HttpChatModel {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, AgentError> {
        if !(endpoint.timeout_secs > 0.0) {
            return Err(AgentError::Precondition(format!("timeout must be positive, got {}", endpoint.timeout_secs)));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(endpoint.timeout_secs))
            .build()
            .map_err(|e| AgentError::Precondition(format!("http client: {e}")))?;
        Ok(Self { endpoint, client })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<String, Failure> {
        let mut req = self.client.post(url).json(body);
        if let Some(key) = self.endpoint.api_key_env.as_deref().and_then(|v| std::env::var(v).ok()) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retry {
            status: e.status().map(|s| s.as_u16()),
            timeout: e.is_timeout(),
            message: e.to_string(),
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Retry {
            status: Some(status.as_u16()),
            timeout: e.is_timeout(),
            message: e.to_string(),
        })?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retry { status: Some(status.as_u16()), message: text, timeout: false });
        }
        if !status.is_success() {
            return Err(Failure::Fatal(AgentError::Transport { status: Some(status.as_u16()), message: text, attempts: 1 }));
        }
        let value: Value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(AgentError::Response(e.to_string())))?;
        response_text(&value).map_err(Failure::Fatal)
    }
}

impl ChatModel for HttpChatModel {
    fn chat(&mut self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        let body = request_body(&self.endpoint, messages)?;
        let url = self.endpoint.completions_url();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&url, &body) {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(AgentError::Transport { status, message, .. })) => {
                    return Err(AgentError::Transport { status, message, attempts })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry { status, message, timeout }) => {
                    if attempts > self.endpoint.max_retries {
                        return Err(if timeout {
                            AgentError::Timeout { message, attempts }
                        } else {
                            AgentError::Transport { status, message, attempts }
                        });
                    }
                    let wait = self.endpoint.backoff(attempts - 1);
                    log::warn!("{url}: attempt {attempts} failed ({message}); retrying in {wait:?}");
                    thread::sleep(wait);
                }
            }
        }
    }
}

/// Replays canned assistant replies in order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedModel {
    replies: VecDeque<String>,
}

impl ScriptedModel {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self { replies: replies.into_iter().map(Into::into).collect() }
    }

    /// Reads a JSON array of reply strings.
    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let fixture = |message: String| AgentError::Fixture { path: path.to_path_buf(), message };
        let text = fs::read_to_string(path).map_err(|e| fixture(e.to_string()))?;
        let replies: Vec<String> = serde_json::from_str(&text).map_err(|e| fixture(e.to_string()))?;
        Ok(Self::new(replies))
    }

    pub fn remaining(&self) -> usize {
        self.replies.len()
    }
}

impl ChatModel for ScriptedModel {
    fn chat(&mut self, _messages: &[ChatMessage]) -> Result<String, AgentError> {
        self.replies.pop_front().ok_or(AgentError::Exhausted)
    }
}

impl<M: ChatModel + ?Sized> ChatModel for Box<M> {
    fn chat(&mut self, messages: &[ChatMessage]) -> Result<String, AgentError> {
        (**self).chat(messages)
    }
}
