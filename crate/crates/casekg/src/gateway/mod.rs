//! Concrete chat-completion backends.

pub mod audit;
pub mod http;
pub mod script;

pub use audit::{AuditedGateway, CountingGateway};
pub use http::{HttpGateway, HttpSettings, RetryPolicy};
pub use script::{MissPolicy, ScriptGateway};

use casekg_core::gateway::{ChatGateway, CompletionRequest, CompletionResponse, GatewayError};

/// Either backend behind one type.
pub enum Backend {
    Http(HttpGateway),
    Script(ScriptGateway),
}

impl ChatGateway for Backend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        match self {
            Backend::Http(g) => g.complete(request),
            Backend::Script(g) => g.complete(request),
        }
    }
}
