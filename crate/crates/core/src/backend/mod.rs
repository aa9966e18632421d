//! Text-continuation backends behind one contract.
//!
//! Every backend answers a [`GenerationRequest`] with an OpenAI-shaped JSON
//! body; [`generate`] parses that body into texts and [`Usage`]. Mocks
//! synthesize the same shape, and cassettes store it verbatim, so live,
//! recorded, and replayed runs share one decoding path.

mod cassette;
mod cost;
mod http;
mod limiter;
mod mock;
mod protocol;
mod select;

pub use cassette::{CassetteRecord, RecordingBackend, ReplayBackend};
pub use cost::{estimate_cost, CostTable, ModelPrice};
pub use http::{HttpBackend, HttpReply, HttpTransport, ReqwestTransport, RetryPolicy};
pub use limiter::InFlightLimiter;
pub use mock::{ConstantBackend, EchoTailBackend, OracleBackend, ScriptedBackend};
pub use protocol::{canonical_request, parse_response, request_body, request_hash, whitespace_tokens};
pub use select::{BackendContext, BackendSelection};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Concurrent requests allowed per endpoint unless configured otherwise.
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;

pub const ENV_API_KEY: &str = "NLTS_API_KEY";
pub const ENV_API_BASE: &str = "NLTS_API_BASE";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimit { attempts: u32 },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("authentication rejected (HTTP {0})")]
    Auth(u16),
    #[error("backend configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub num_samples: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self::completion_defaults("gpt-3.5-turbo-instruct")
    }
}

impl GenerationParams {
    /// Completion-style models: temperature 0.7.
    pub fn completion_defaults(model: impl Into<String>) -> Self {
        Self { model: model.into(), temperature: 0.7, top_p: 1.0, max_tokens: 256, num_samples: 1, stop: None }
    }

    /// Chat-style models: temperature 1.0, top-p 0.8.
    pub fn chat_defaults(model: impl Into<String>) -> Self {
        Self { temperature: 1.0, top_p: 0.8, ..Self::completion_defaults(model) }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p {} not in (0, 1]", self.top_p));
        }
        if self.max_tokens == 0 || self.num_samples == 0 {
            return bad("max_tokens and num_samples must be positive".into());
        }
        Ok(())
    }
}

/// Token accounting, additive across requests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub requests: u64,
}

impl std::ops::Add for Usage {
    type Output = Usage;

    fn add(self, rhs: Usage) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens + rhs.prompt_tokens,
            completion_tokens: self.completion_tokens + rhs.completion_tokens,
            requests: self.requests + rhs.requests,
        }
    }
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Usage {
    fn sum<I: Iterator<Item = Usage>>(iter: I) -> Usage {
        iter.fold(Usage::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "style", content = "content")]
pub enum Prompt {
    /// Completion endpoint, plain text.
    Raw(String),
    /// Chat endpoint, role/content messages.
    Chat(Vec<Message>),
}

impl Prompt {
    /// The text a model would continue: the raw prompt, or the last user message.
    pub fn continuation_context(&self) -> &str {
        match self {
            Prompt::Raw(text) => text,
            Prompt::Chat(messages) => messages
                .iter()
                .rev()
                .find(|m| m.role == "user")
                .or(messages.last())
                .map(|m| m.content.as_str())
                .unwrap_or(""),
        }
    }

    pub fn endpoint_path(&self) -> &'static str {
        match self {
            Prompt::Raw(_) => "v1/completions",
            Prompt::Chat(_) => "v1/chat/completions",
        }
    }
}

/// One logical request. `sample_index` and `attempt` do not go on the wire;
/// they make otherwise identical prompts separately addressable in cassettes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: Prompt,
    pub params: GenerationParams,
    #[serde(default)]
    pub sample_index: u64,
    #[serde(default)]
    pub attempt: u32,
}

impl GenerationRequest {
    pub fn new(prompt: Prompt, params: GenerationParams) -> Self {
        Self { prompt, params, sample_index: 0, attempt: 0 }
    }

    pub fn for_sample(mut self, sample_index: u64, attempt: u32) -> Self {
        self.sample_index = sample_index;
        self.attempt = attempt;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if let Prompt::Chat(messages) = &self.prompt {
            if messages.is_empty() {
                return Err(BackendError::Protocol("chat request has no messages".into()));
            }
        }
        self.params.validate()
    }
}

/// A response body as received, plus how many HTTP attempts it took.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub body: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub texts: Vec<String>,
    pub usage: Usage,
}

pub trait Backend: Send + Sync {
    /// Stable description recorded in run manifests.
    fn identity(&self) -> String;

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError>;

    fn max_in_flight(&self) -> usize {
        DEFAULT_MAX_IN_FLIGHT
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn identity(&self) -> String {
        (**self).identity()
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        (**self).send(request)
    }

    fn max_in_flight(&self) -> usize {
        (**self).max_in_flight()
    }
}

/// Send a request and decode the response body.
pub fn generate(backend: &dyn Backend, request: &GenerationRequest) -> Result<Generation, BackendError> {
    request.validate()?;
    let raw = backend.send(request)?;
    let (texts, reported) = parse_response(&raw.body)?;
    let usage = match reported {
        Some(u) => Usage { requests: u64::from(raw.attempts.max(1)), ..u },
        None => Usage {
            prompt_tokens: whitespace_tokens(request.prompt.continuation_context()),
            completion_tokens: texts.iter().map(|t| whitespace_tokens(t)).sum(),
            requests: u64::from(raw.attempts.max(1)),
        },
    };
    Ok(Generation { texts, usage })
}

/// `num_samples` continuations of a completion-style prompt.
pub fn complete(
    backend: &dyn Backend,
    prompt: &str,
    params: &GenerationParams,
) -> Result<(Vec<String>, Usage), BackendError> {
    let request = GenerationRequest::new(Prompt::Raw(prompt.to_owned()), params.clone());
    generate(backend, &request).map(|g| (g.texts, g.usage))
}

/// `num_samples` continuations of a chat conversation.
pub fn chat_complete(
    backend: &dyn Backend,
    messages: &[Message],
    params: &GenerationParams,
) -> Result<(Vec<String>, Usage), BackendError> {
    let request = GenerationRequest::new(Prompt::Chat(messages.to_vec()), params.clone());
    generate(backend, &request).map(|g| (g.texts, g.usage))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_adds_componentwise() {
        let a = Usage { prompt_tokens: 3, completion_tokens: 4, requests: 1 };
        let total: Usage = [a, a, Usage::default()].into_iter().sum();
        assert_eq!(total, Usage { prompt_tokens: 6, completion_tokens: 8, requests: 2 });
    }

    #[test]
    fn empty_chat_is_a_protocol_error() {
        let backend = OracleBackend::new("1 2");
        let err = chat_complete(&backend, &[], &GenerationParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::Protocol(_)));
    }

    #[test]
    fn params_are_validated() {
        assert!(GenerationParams { top_p: 0.0, ..GenerationParams::default() }.validate().is_err());
        assert!(GenerationParams { num_samples: 0, ..GenerationParams::default() }.validate().is_err());
        assert!(GenerationParams::chat_defaults("glm-4-air").validate().is_ok());
    }

    #[test]
    fn chat_context_is_last_user_message() {
        let p = Prompt::Chat(vec![Message::system("sys"), Message::user("1, 2")]);
        assert_eq!(p.continuation_context(), "1, 2");
        assert_eq!(p.endpoint_path(), "v1/chat/completions");
    }
}
