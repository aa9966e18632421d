//! Backend choice as configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Backend, BackendError, ConstantBackend, EchoTailBackend, HttpBackend, OracleBackend, RecordingBackend,
    ReplayBackend, ScriptedBackend,
};

/// What a backend may need to know about the job it serves.
#[derive(Debug, Clone, Default)]
pub struct BackendContext {
    /// Encoded true continuation, for the oracle.
    pub oracle_text: Option<String>,
    pub horizon: usize,
    pub step_separator: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSelection {
    #[default]
    Oracle,
    EchoTail {
        #[serde(default = "default_tail")]
        tail: usize,
    },
    Constant {
        fragment: String,
    },
    Scripted {
        path: PathBuf,
    },
    Replay {
        path: PathBuf,
    },
    /// OpenAI-compatible gateway from `NLTS_API_BASE` / `NLTS_API_KEY`.
    Live {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        record: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_in_flight: Option<usize>,
    },
}

fn default_tail() -> usize {
    1
}

impl BackendSelection {
    /// Relative paths resolve against `base_dir`.
    pub fn build(&self, ctx: &BackendContext, base_dir: &Path) -> Result<Box<dyn Backend>, BackendError> {
        let resolve = |p: &Path| {
            if p.is_absolute() {
                p.to_owned()
            } else {
                base_dir.join(p)
            }
        };
        Ok(match self {
            BackendSelection::Oracle => {
                let text = ctx.oracle_text.clone().ok_or_else(|| {
                    BackendError::Config("the oracle backend needs a known target continuation".into())
                })?;
                Box::new(OracleBackend::new(text))
            }
            BackendSelection::EchoTail { tail } => {
                Box::new(EchoTailBackend::new(*tail, ctx.horizon, ctx.step_separator.clone()))
            }
            BackendSelection::Constant { fragment } => {
                Box::new(ConstantBackend::new(fragment, ctx.horizon, &ctx.step_separator))
            }
            BackendSelection::Scripted { path } => Box::new(ScriptedBackend::from_file(&resolve(path))?),
            BackendSelection::Replay { path } => Box::new(ReplayBackend::from_file(&resolve(path))?),
            BackendSelection::Live { record, max_in_flight } => {
                let mut http = HttpBackend::from_env()?;
                if let Some(max) = max_in_flight {
                    http = http.with_max_in_flight(*max);
                }
                match record {
                    Some(path) => Box::new(RecordingBackend::new(http, resolve(path))?),
                    None => Box::new(http),
                }
            }
        })
    }

    /// Whether results can be reproduced without network access.
    pub fn is_offline(&self) -> bool {
        !matches!(self, BackendSelection::Live { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_requires_text() {
        let err = BackendSelection::Oracle.build(&BackendContext::default(), Path::new(".")).err().unwrap();
        assert!(matches!(err, BackendError::Config(_)));
    }

    #[test]
    fn parses_tagged_json() {
        let s: BackendSelection = serde_json::from_str(r#"{"kind":"echo_tail","tail":3}"#).unwrap();
        assert_eq!(s, BackendSelection::EchoTail { tail: 3 });
        let s: BackendSelection = serde_json::from_str(r#"{"kind":"replay","path":"c.jsonl"}"#).unwrap();
        assert!(s.is_offline());
    }
}
