//! Live backend speaking the local-serving chat protocol over HTTP.

use std::thread;
use std::time::{Duration, Instant};

use casekg_core::gateway::{ChatGateway, CompletionRequest, CompletionResponse, GatewayError};
use serde_json::{json, Value};

pub const DEFAULT_CHAT_PATH: &str = "/api/chat";

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub request_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 3, initial_backoff: Duration::from_secs(1), request_timeout: Duration::from_secs(300) }
    }
}

impl RetryPolicy {
    /// Delay before attempt `n` (1-based, n >= 2): doubles from the initial value.
    pub fn backoff_before(&self, attempt: u32) -> Duration {
        self.initial_backoff.saturating_mul(1u32 << (attempt.saturating_sub(2)).min(16))
    }
}

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub base_url: String,
    pub path: String,
    pub api_key: Option<String>,
    pub retry: RetryPolicy,
}

pub struct HttpGateway {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

enum Failure {
    Retryable { timeout: bool, message: String },
    Fatal(GatewayError),
}

impl HttpGateway {
    pub fn new(settings: HttpSettings) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.retry.request_timeout)
            .build()
            .map_err(|e| GatewayError::Transport { attempts: 0, message: e.to_string() })?;
        let url = format!("{}/{}", settings.base_url.trim_end_matches('/'), settings.path.trim_start_matches('/'));
        Ok(Self { client, url, api_key: settings.api_key, retry: settings.retry })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retryable { timeout: e.is_timeout(), message: e.to_string() })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Failure::Retryable { timeout: e.is_timeout(), message: e.to_string() })?;
        if status.is_server_error() || status.as_u16() == 408 || status.as_u16() == 429 {
            return Err(Failure::Retryable { timeout: status.as_u16() == 408, message: format!("HTTP {status}") });
        }
        if !status.is_success() {
            return Err(Failure::Fatal(GatewayError::Transport {
                attempts: 1,
                message: format!("HTTP {status}: {}", truncate(&text, 200)),
            }));
        }
        parse_chat_response(&text).map_err(Failure::Fatal)
    }
}

/// Request body: the shared chat fields plus `options` so servers that read
/// sampling settings from there also run at the requested temperature.
pub fn request_body(request: &CompletionRequest) -> Value {
    let mut messages = Vec::new();
    if let Some(system) = &request.system_text {
        messages.push(json!({"role": "system", "content": system}));
    }
    messages.push(json!({"role": "user", "content": request.user_text}));
    let mut body = json!({
        "model": request.model_id,
        "messages": messages,
        "temperature": request.temperature,
        "stream": false,
        "options": {"temperature": request.temperature},
    });
    if let Some(n) = request.max_output_tokens {
        body["max_tokens"] = json!(n);
        body["options"]["num_predict"] = json!(n);
    }
    body
}

/// Accepts `{"message": {"content": ..}}` and `{"choices": [{"message": {"content": ..}}]}`.
pub fn parse_chat_response(text: &str) -> Result<String, GatewayError> {
    let v: Value = serde_json::from_str(text).map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let content = v
        .pointer("/message/content")
        .or_else(|| v.pointer("/choices/0/message/content"))
        .and_then(Value::as_str)
        .ok_or_else(|| GatewayError::MalformedResponse(format!("no message content in {}", truncate(text, 200))))?;
    Ok(content.to_string())
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl ChatGateway for HttpGateway {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        let body = request_body(request);
        let started = Instant::now();
        let attempts = self.retry.max_attempts.max(1);
        let mut last = (false, String::new());
        for n in 1..=attempts {
            if n > 1 {
                thread::sleep(self.retry.backoff_before(n));
            }
            match self.attempt(&body) {
                Ok(text) => {
                    return Ok(CompletionResponse { text, latency: started.elapsed(), backend_id: "http".into() })
                }
                Err(Failure::Fatal(GatewayError::Transport { message, .. })) => {
                    return Err(GatewayError::Transport { attempts: n, message })
                }
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable { timeout, message }) => {
                    log::warn!("attempt {n}/{attempts} to {} failed: {message}", self.url);
                    last = (timeout, message);
                }
            }
        }
        if last.0 {
            Err(GatewayError::Timeout { attempts })
        } else {
            Err(GatewayError::Transport { attempts, message: last.1 })
        }
    }
}
