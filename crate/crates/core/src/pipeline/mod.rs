//! End-to-end forecast runs.
//!
//! For each sample index `i < m`: draw noise on substream `(seed, i)`,
//! perturb the history, fit a scaler, encode, prompt, request one
//! continuation, and decode `H` values. Valid samples are aggregated by
//! index, so completion order never affects the result.

mod prompt;
mod run;

pub use prompt::{build_prompt, PromptStyle, SYSTEM_PROMPT, USER_INSTRUCTION};
pub use run::{oracle_continuation, prepare_sample, run_nlts, PreparedSample};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{AggregationError, PointForecast, SamplePaths, DEFAULT_QUANTILE_LEVELS};
use crate::backend::{BackendError, GenerationParams, Usage};
use crate::codec::{CodecConfig, CodecError, ParseReport, Scaler};
use crate::noise::{NoiseError, NoiseSpec};
use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid job: {0}")]
    Config(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("sample {sample}: {source}")]
    Backend {
        sample: usize,
        #[source]
        source: BackendError,
    },
    #[error("only {valid} of {total} samples parsed; need at least {required}")]
    InsufficientSamples { valid: usize, required: usize, total: usize },
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

/// Which history the per-sample scaler is fit on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerFit {
    /// After noise injection (the default order: perturb, then encode).
    #[default]
    NoisyHistory,
    /// Once, on the unperturbed history.
    CleanHistory,
}

/// Everything about a run except the data. This is the run-config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JobSettings {
    pub noise: NoiseSpec,
    pub codec: CodecConfig,
    pub params: GenerationParams,
    pub prompt_style: PromptStyle,
    /// Sample count `m`.
    pub samples: usize,
    pub seed: u64,
    pub fresh_noise_per_sample: bool,
    pub retries_per_sample: u32,
    pub scaler_fit: ScalerFit,
    pub quantile_levels: Vec<f64>,
}

impl Default for JobSettings {
    fn default() -> Self {
        Self {
            noise: NoiseSpec::none(),
            codec: CodecConfig::default(),
            params: GenerationParams::default(),
            prompt_style: PromptStyle::Raw,
            samples: 10,
            seed: 0,
            fresh_noise_per_sample: true,
            retries_per_sample: 0,
            scaler_fit: ScalerFit::NoisyHistory,
            quantile_levels: DEFAULT_QUANTILE_LEVELS.to_vec(),
        }
    }
}

impl JobSettings {
    /// Defaults for chat-style models: basic codec, temperature 1.0, top-p 0.8.
    pub fn chat(model: &str) -> Self {
        Self {
            codec: CodecConfig::basic(),
            params: GenerationParams::chat_defaults(model),
            prompt_style: PromptStyle::Chat,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastJob {
    pub history: TimeSeries,
    /// Steps to forecast, `H`.
    pub horizon: usize,
    #[serde(flatten)]
    pub settings: JobSettings,
}

impl ForecastJob {
    pub fn new(history: TimeSeries, horizon: usize, settings: JobSettings) -> Self {
        Self { history, horizon, settings }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let s = &self.settings;
        if self.horizon == 0 {
            return Err(PipelineError::Config("horizon must be at least 1".into()));
        }
        if s.samples == 0 {
            return Err(PipelineError::Config("samples must be at least 1".into()));
        }
        s.noise.validate()?;
        s.codec.validate()?;
        s.params.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(())
    }

    /// Minimum completion budget: `H * (k + 3) * factor`, factor 2 when
    /// digits are space-separated and 1 in basic mode.
    pub fn min_max_tokens(&self) -> u32 {
        let codec = &self.settings.codec;
        let factor = if codec.basic { 1 } else { 2 };
        let bound = self.horizon as u64 * (u64::from(codec.precision) + 3) * factor;
        bound.min(u64::from(u32::MAX)) as u32
    }

    /// Valid samples needed for the run to succeed: `ceil(m / 2)`.
    pub fn required_valid(&self) -> usize {
        self.settings.samples.div_ceil(2)
    }
}

/// Per-sample outcome, in sample-index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub index: usize,
    pub valid: bool,
    pub scaler: Scaler,
    pub attempts: u32,
    /// One per attempt that produced any parse result.
    pub parse_reports: Vec<ParseReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    pub rng: String,
    pub seed: u64,
    pub backend: String,
    pub history_name: String,
    pub history_len: usize,
    pub horizon: usize,
    pub noise: NoiseSpec,
    pub codec: CodecConfig,
    /// Parameters as sent, after the completion budget was enforced.
    pub params: GenerationParams,
    pub prompt_style: PromptStyle,
    pub samples: usize,
    pub fresh_noise_per_sample: bool,
    pub retries_per_sample: u32,
    pub scaler_fit: ScalerFit,
    pub scaler_formula: String,
    /// Unix seconds; omitted for offline runs so outputs stay byte-stable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub point: PointForecast,
    /// Valid decoded paths only.
    pub samples: SamplePaths,
    pub valid_samples: usize,
    pub sample_reports: Vec<SampleReport>,
    pub usage: Usage,
    pub manifest: RunManifest,
}

impl ForecastResult {
    pub fn stamp(&mut self, started_at: u64, finished_at: u64) {
        self.manifest.started_at = Some(started_at);
        self.manifest.finished_at = Some(finished_at);
    }
}
