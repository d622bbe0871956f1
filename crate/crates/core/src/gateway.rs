//! Backend-agnostic chat-completion surface. Concrete backends (HTTP, scripted
//! mock, audit wrapper) are provided by the `casekg` crate.

use alloc::string::String;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::digest::sha256_parts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model_id: String,
    pub system_text: Option<String>,
    pub user_text: String,
    pub temperature: f64,
    pub max_output_tokens: Option<u32>,
}

impl CompletionRequest {
    /// Temperature-0 request, as issued by every pipeline stage.
    pub fn new(model_id: impl Into<String>, user_text: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            system_text: None,
            user_text: user_text.into(),
            temperature: 0.0,
            max_output_tokens: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.user_text.is_empty() {
            return Err(GatewayError::InvalidRequest("user_text is empty"));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be >= 0"));
        }
        if self.max_output_tokens == Some(0) {
            return Err(GatewayError::InvalidRequest("max_output_tokens must be positive"));
        }
        Ok(())
    }

    /// Digest of the exact prompt (system and user text). The model id is not
    /// part of it so recorded scripts replay across model aliases.
    pub fn prompt_digest(&self) -> String {
        prompt_digest(self.system_text.as_deref(), &self.user_text)
    }
}

pub fn prompt_digest(system_text: Option<&str>, user_text: &str) -> String {
    sha256_parts([system_text.unwrap_or("").as_bytes(), user_text.as_bytes()])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResponse {
    pub text: String,
    pub latency: Duration,
    pub backend_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("scripted backend has no entry for prompt digest {digest}")]
    ScriptMiss { digest: String },
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
    #[error("malformed backend response: {0}")]
    MalformedResponse(String),
}

/// A chat-completion backend. Implementations must be callable through a
/// shared reference; backends with per-call state use interior mutability.
pub trait ChatGateway {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError>;
}

impl<G: ChatGateway + ?Sized> ChatGateway for &G {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: ChatGateway + ?Sized> ChatGateway for alloc::boxed::Box<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}

impl<G: ChatGateway + ?Sized> ChatGateway for alloc::sync::Arc<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        (**self).complete(request)
    }
}
