//! OpenAI-compatible wire shapes and request canonicalization.

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{BackendError, GenerationRequest, Prompt, Usage};

/// JSON body for `POST {base}/v1/completions` or `/v1/chat/completions`.
pub fn request_body(request: &GenerationRequest) -> Value {
    let p = &request.params;
    let mut body = json!({
        "model": p.model,
        "temperature": p.temperature,
        "top_p": p.top_p,
        "n": p.num_samples,
        "max_tokens": p.max_tokens,
    });
    let map = body.as_object_mut().expect("object literal");
    match &request.prompt {
        Prompt::Raw(text) => {
            map.insert("prompt".into(), Value::String(text.clone()));
        }
        Prompt::Chat(messages) => {
            map.insert("messages".into(), serde_json::to_value(messages).expect("plain struct"));
        }
    }
    if let Some(stop) = &p.stop {
        map.insert("stop".into(), json!(stop));
    }
    body
}

/// Compact JSON with sorted keys; the cassette key. Credentials never enter it.
pub fn canonical_request(request: &GenerationRequest) -> String {
    let value = json!({
        "endpoint": request.prompt.endpoint_path(),
        "body": request_body(request),
        "sample_index": request.sample_index,
        "attempt": request.attempt,
    });
    serde_json::to_string(&value).expect("json values serialize")
}

pub fn request_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Texts (in choice order) and endpoint-reported usage, if any.
pub fn parse_response(body: &str) -> Result<(Vec<String>, Option<Usage>), BackendError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Protocol(format!("response is not JSON: {e}")))?;
    let choices = value
        .get("choices")
        .and_then(Value::as_array)
        .filter(|c| !c.is_empty())
        .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;

    let mut indexed = Vec::with_capacity(choices.len());
    for (position, choice) in choices.iter().enumerate() {
        let text = choice
            .get("text")
            .and_then(Value::as_str)
            .or_else(|| choice.pointer("/message/content").and_then(Value::as_str))
            .ok_or_else(|| BackendError::Protocol(format!("choice {position} has no text")))?;
        let index = choice.get("index").and_then(Value::as_u64).unwrap_or(position as u64);
        indexed.push((index, text.to_owned()));
    }
    indexed.sort_by_key(|(i, _)| *i);

    let usage = value.get("usage").and_then(|u| {
        Some(Usage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
            requests: 1,
        })
    });
    Ok((indexed.into_iter().map(|(_, t)| t).collect(), usage))
}

/// Token estimate for backends that do not report usage: whitespace-delimited
/// words, counting each separator-glued comma as its own token.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().map(|w| 1 + w.matches(',').count() as u64 - u64::from(w == ",")).sum()
}

/// An OpenAI-shaped body for locally produced texts.
pub(crate) fn synthesize_body(request: &GenerationRequest, texts: &[String], model_tag: &str) -> String {
    let choices: Vec<Value> = texts
        .iter()
        .enumerate()
        .map(|(index, text)| match request.prompt {
            Prompt::Raw(_) => json!({"index": index, "text": text, "finish_reason": "stop"}),
            Prompt::Chat(_) => json!({
                "index": index,
                "message": {"role": "assistant", "content": text},
                "finish_reason": "stop",
            }),
        })
        .collect();
    let object = match request.prompt {
        Prompt::Raw(_) => "text_completion",
        Prompt::Chat(_) => "chat.completion",
    };
    let body = json!({
        "object": object,
        "model": model_tag,
        "choices": choices,
        "usage": {
            "prompt_tokens": whitespace_tokens(request.prompt.continuation_context()),
            "completion_tokens": texts.iter().map(|t| whitespace_tokens(t)).sum::<u64>(),
        },
    });
    serde_json::to_string(&body).expect("json values serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{GenerationParams, Message};

    #[test]
    fn completion_body_has_openai_fields() {
        let req = GenerationRequest::new(Prompt::Raw("1 2, ".into()), GenerationParams::default());
        let body = request_body(&req);
        assert_eq!(body["prompt"], "1 2, ");
        assert_eq!(body["n"], 1);
        assert_eq!(body["temperature"], 0.7);
        assert!(body.get("messages").is_none());
    }

    #[test]
    fn chat_body_carries_messages() {
        let req = GenerationRequest::new(
            Prompt::Chat(vec![Message::system("s"), Message::user("u")]),
            GenerationParams::chat_defaults("m"),
        );
        let body = request_body(&req);
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["top_p"], 0.8);
    }

    #[test]
    fn hash_depends_on_sample_index_only_through_canonical_form() {
        let req = GenerationRequest::new(Prompt::Raw("x".into()), GenerationParams::default());
        let a = canonical_request(&req);
        let b = canonical_request(&req.clone().for_sample(1, 0));
        assert_ne!(request_hash(&a), request_hash(&b));
        assert_eq!(request_hash(&a), request_hash(&canonical_request(&req)));
        assert_eq!(request_hash(&a).len(), 64);
    }

    #[test]
    fn parses_completion_and_chat_shapes() {
        let (t, u) = parse_response(
            r#"{"choices":[{"index":1,"text":"b"},{"index":0,"text":"a"}],
                "usage":{"prompt_tokens":5,"completion_tokens":2,"total_tokens":7}}"#,
        )
        .unwrap();
        assert_eq!(t, vec!["a", "b"]);
        assert_eq!(u.unwrap().prompt_tokens, 5);

        let (t, u) = parse_response(r#"{"choices":[{"message":{"role":"assistant","content":"1 2"}}]}"#).unwrap();
        assert_eq!(t, vec!["1 2"]);
        assert!(u.is_none());
    }

    #[test]
    fn malformed_bodies_are_protocol_errors() {
        for body in ["", "not json", "{}", r#"{"choices":[]}"#, r#"{"choices":[{"index":0}]}"#] {
            assert!(matches!(parse_response(body), Err(BackendError::Protocol(_))), "{body}");
        }
    }

    #[test]
    fn token_estimate_counts_words_and_commas() {
        assert_eq!(whitespace_tokens("2 2, 2 5"), 5);
        assert_eq!(whitespace_tokens("5 1 8 , 4 7 3"), 7);
        assert_eq!(whitespace_tokens(""), 0);
    }
}
