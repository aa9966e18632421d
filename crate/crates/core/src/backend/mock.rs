//! Deterministic offline backends.

use std::path::Path;

use super::protocol::synthesize_body;
use super::{Backend, BackendError, GenerationRequest, RawResponse};

fn respond(request: &GenerationRequest, text: &str, tag: &str) -> RawResponse {
    let texts = vec![text.to_owned(); request.params.num_samples.max(1) as usize];
    RawResponse { body: synthesize_body(request, &texts, tag), attempts: 1 }
}

/// Returns one fixed text for every request, typically the encoded true
/// continuation.
#[derive(Debug, Clone)]
pub struct OracleBackend {
    text: String,
}

impl OracleBackend {
    pub fn new(text: impl Into<String>) -> Self {
        Self { text: text.into() }
    }
}

impl Backend for OracleBackend {
    fn identity(&self) -> String {
        "mock:oracle".into()
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        Ok(respond(request, &self.text, "mock-oracle"))
    }
}

/// Continues the prompt by cycling its last `tail` steps for `steps` steps.
#[derive(Debug, Clone)]
pub struct EchoTailBackend {
    tail: usize,
    steps: usize,
    step_separator: String,
}

impl EchoTailBackend {
    pub fn new(tail: usize, steps: usize, step_separator: impl Into<String>) -> Self {
        Self { tail: tail.max(1), steps, step_separator: step_separator.into() }
    }

    pub fn continuation(&self, context: &str) -> String {
        let sequence = context.rsplit_once("Sequence:\n").map_or(context, |(_, s)| s);
        let token = self.step_separator.trim();
        let fragments: Vec<&str> =
            sequence.split(token).map(str::trim).filter(|f| f.chars().any(|c| c.is_ascii_digit())).collect();
        let start = fragments.len().saturating_sub(self.tail);
        let tail = &fragments[start..];
        if tail.is_empty() {
            return String::new();
        }
        tail.iter().cycle().take(self.steps).copied().collect::<Vec<_>>().join(&self.step_separator)
    }
}

impl Backend for EchoTailBackend {
    fn identity(&self) -> String {
        format!("mock:echo-tail(tail={}, steps={})", self.tail, self.steps)
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        let text = self.continuation(request.prompt.continuation_context());
        Ok(respond(request, &text, "mock-echo"))
    }
}

/// Repeats one encoded value `steps` times.
#[derive(Debug, Clone)]
pub struct ConstantBackend {
    text: String,
}

impl ConstantBackend {
    pub fn new(fragment: &str, steps: usize, step_separator: &str) -> Self {
        Self { text: vec![fragment; steps].join(step_separator) }
    }
}

impl Backend for ConstantBackend {
    fn identity(&self) -> String {
        "mock:constant".into()
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        Ok(respond(request, &self.text, "mock-constant"))
    }
}

/// Serves fixture continuations, one per line: sample `i`, attempt `a` gets
/// line `(i + a) mod lines`.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    lines: Vec<String>,
}

impl ScriptedBackend {
    pub fn new(lines: Vec<String>) -> Result<Self, BackendError> {
        if lines.is_empty() {
            return Err(BackendError::Config("scripted backend needs at least one line".into()));
        }
        Ok(Self { lines })
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::new(text.lines().map(str::to_owned).collect())
    }
}

impl Backend for ScriptedBackend {
    fn identity(&self) -> String {
        format!("mock:scripted({} lines)", self.lines.len())
    }

    fn send(&self, request: &GenerationRequest) -> Result<RawResponse, BackendError> {
        let i = (request.sample_index as usize).wrapping_add(request.attempt as usize) % self.lines.len();
        Ok(respond(request, &self.lines[i], "mock-scripted"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{chat_complete, complete, GenerationParams, Message};

    #[test]
    fn oracle_repeats_its_text_per_sample() {
        let params = GenerationParams { num_samples: 3, ..GenerationParams::default() };
        let (texts, usage) = complete(&OracleBackend::new("2 2, 2 5"), "1 0, ", &params).unwrap();
        assert_eq!(texts, vec!["2 2, 2 5"; 3]);
        assert_eq!(usage.completion_tokens, 15);
        assert_eq!(usage.requests, 1);
    }

    #[test]
    fn echo_tail_repeats_last_values_of_chat_sequence() {
        let backend = EchoTailBackend::new(2, 5, ", ");
        let messages = [
            Message::system("You are a helpful assistant."),
            Message::user("Please continue.\nSequence:\n5 1 8 , 4 7 3 , 6 0 0"),
        ];
        let (texts, _) = chat_complete(&backend, &messages, &GenerationParams::default()).unwrap();
        assert_eq!(texts, vec!["4 7 3, 6 0 0, 4 7 3, 6 0 0, 4 7 3"]);
    }

    #[test]
    fn echo_tail_on_raw_prompt_ignores_trailing_separator() {
        let b = EchoTailBackend::new(1, 2, ", ");
        assert_eq!(b.continuation("2 2, 2 5, 2 8, "), "2 8, 2 8");
        assert_eq!(b.continuation("no numbers"), "");
    }

    #[test]
    fn constant_and_scripted() {
        let c = ConstantBackend::new("5 0", 3, ", ");
        let (t, _) = complete(&c, "x", &GenerationParams::default()).unwrap();
        assert_eq!(t, vec!["5 0, 5 0, 5 0"]);

        let s = ScriptedBackend::new(vec!["a".into(), "b".into()]).unwrap();
        let req = |i| {
            GenerationRequest::new(super::super::Prompt::Raw("x".into()), GenerationParams::default()).for_sample(i, 0)
        };
        let text = |i| crate::backend::generate(&s, &req(i)).unwrap().texts[0].clone();
        assert_eq!((text(0), text(1), text(2)), ("a".into(), "b".into(), "a".into()));
        assert!(ScriptedBackend::new(vec![]).is_err());
    }
}
