use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::backend::{Message, Prompt};

pub const SYSTEM_PROMPT: &str = "You are a helpful assistant specialized in time series forecasting. \
The user provides a comma-separated sequence of decimal numbers, and you will predict the following values.";

pub const USER_INSTRUCTION: &str =
    "Please continue the sequence without any additional text or explanation. Only output the predicted numbers.";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    /// Encoded history for a completion endpoint.
    #[default]
    Raw,
    /// System + user messages for a chat endpoint.
    Chat,
}

impl std::str::FromStr for PromptStyle {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(PromptStyle::Raw),
            "chat" => Ok(PromptStyle::Chat),
            other => Err(PipelineError::Config(format!("unknown prompt style `{other}`"))),
        }
    }
}

/// Wrap an encoded history as a prompt.
///
/// Raw prompts end with the step separator so the model's next tokens are
/// the first forecast step.
pub fn build_prompt(encoded_history: &str, style: PromptStyle, step_separator: &str) -> Result<Prompt, PipelineError> {
    if encoded_history.trim().is_empty() {
        return Err(PipelineError::Config("encoded history is empty".into()));
    }
    Ok(match style {
        PromptStyle::Raw => Prompt::Raw(format!("{encoded_history}{step_separator}")),
        PromptStyle::Chat => Prompt::Chat(vec![
            Message::system(SYSTEM_PROMPT),
            Message::user(format!("{USER_INSTRUCTION}\nSequence:\n{encoded_history}")),
        ]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_prompt_ends_with_separator_cue() {
        assert_eq!(
            build_prompt("2 2, 2 5, 2 8", PromptStyle::Raw, ", ").unwrap(),
            Prompt::Raw("2 2, 2 5, 2 8, ".into())
        );
    }

    #[test]
    fn chat_prompt_has_fixed_system_text() {
        let Prompt::Chat(messages) = build_prompt("5 1 8, 4 7 3", PromptStyle::Chat, ", ").unwrap() else {
            panic!("expected chat prompt");
        };
        assert_eq!(messages.len(), 2);
        assert_eq!(messages[0].role, "system");
        assert_eq!(
            messages[0].content,
            "You are a helpful assistant specialized in time series forecasting. The user provides a \
             comma-separated sequence of decimal numbers, and you will predict the following values."
        );
        assert!(messages[1].content.ends_with("Sequence:\n5 1 8, 4 7 3"));
        assert!(messages[1].content.starts_with(USER_INSTRUCTION));
    }

    #[test]
    fn empty_history_is_a_config_error() {
        assert!(matches!(build_prompt("", PromptStyle::Raw, ", "), Err(PipelineError::Config(_))));
    }
}
