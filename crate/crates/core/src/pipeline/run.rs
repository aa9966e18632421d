use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{build_prompt, ForecastJob, ForecastResult, PipelineError, RunManifest, SampleReport, ScalerFit};
use crate::aggregate::{aggregate_samples, SamplePaths};
use crate::backend::{generate, Backend, GenerationParams, GenerationRequest, Prompt, Usage};
use crate::codec::{deserialize, fit_scaler, serialize, CodecConfig, CodecError, Scaler};
use crate::noise::inject_noise;
use crate::rng::{substream, RNG_IDENTITY};
use crate::series::TimeSeries;

/// Upper bound on worker threads regardless of backend parallelism.
const MAX_WORKERS: usize = 16;

/// The noisy history, scaler, and prompt for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub index: usize,
    pub noisy_history: TimeSeries,
    pub scaler: Scaler,
    pub encoded: String,
    pub prompt: Prompt,
}

/// Deterministic preparation of sample `index`: everything before the
/// backend call.
pub fn prepare_sample(job: &ForecastJob, index: usize) -> Result<PreparedSample, PipelineError> {
    let s = &job.settings;
    let stream = if s.fresh_noise_per_sample { index as u64 } else { 0 };
    let noisy = inject_noise(&job.history, &s.noise, &mut substream(s.seed, stream))?;
    let scaler = match s.scaler_fit {
        ScalerFit::NoisyHistory => fit_scaler(&noisy, &s.codec)?,
        ScalerFit::CleanHistory => fit_scaler(&job.history, &s.codec)?,
    };
    let encoded = serialize(&noisy, &scaler, &s.codec)?;
    let prompt = build_prompt(&encoded, s.prompt_style, &s.codec.step_separator)?;
    Ok(PreparedSample { index, noisy_history: noisy, scaler, encoded, prompt })
}

/// The true continuation encoded with the clean-history scaler; what an
/// oracle backend should answer.
pub fn oracle_continuation(history: &TimeSeries, target: &[f64], codec: &CodecConfig) -> Result<String, CodecError> {
    let scaler = fit_scaler(history, codec)?;
    crate::codec::serialize_values(target, &scaler, codec)
}

struct SampleOutcome {
    report: SampleReport,
    values: Option<Vec<f64>>,
    usage: Usage,
}

fn run_sample(
    job: &ForecastJob,
    params: &GenerationParams,
    backend: &dyn Backend,
    index: usize,
) -> Result<SampleOutcome, PipelineError> {
    let prepared = prepare_sample(job, index)?;
    let s = &job.settings;
    let mut usage = Usage::default();
    let mut parse_reports = Vec::new();
    let mut failure = None;
    let mut attempts = 0;

    for attempt in 0..=s.retries_per_sample {
        attempts += 1;
        let request = GenerationRequest::new(prepared.prompt.clone(), params.clone()).for_sample(index as u64, attempt);
        let generation =
            generate(backend, &request).map_err(|source| PipelineError::Backend { sample: index, source })?;
        usage += generation.usage;
        let text = generation.texts.first().map(String::as_str).unwrap_or("");
        match deserialize(text, &prepared.scaler, &s.codec, job.horizon) {
            Ok((values, report)) => {
                let complete = !report.truncated;
                parse_reports.push(report);
                if complete {
                    return Ok(SampleOutcome {
                        report: SampleReport {
                            index,
                            valid: true,
                            scaler: prepared.scaler,
                            attempts,
                            parse_reports,
                            failure: None,
                        },
                        values: Some(values),
                        usage,
                    });
                }
                failure = Some(format!("parsed {} of {} steps", values.len(), job.horizon));
            }
            Err(e) => failure = Some(e.to_string()),
        }
    }

    Ok(SampleOutcome {
        report: SampleReport { index, valid: false, scaler: prepared.scaler, attempts, parse_reports, failure },
        values: None,
        usage,
    })
}

/// Run the full noise -> encode -> sample -> decode -> aggregate loop.
pub fn run_nlts(job: &ForecastJob, backend: &dyn Backend) -> Result<ForecastResult, PipelineError> {
    job.validate()?;
    let s = &job.settings;
    let m = s.samples;

    let mut params = s.params.clone();
    params.num_samples = 1;
    params.max_tokens = params.max_tokens.max(job.min_max_tokens());

    let workers = backend.max_in_flight().clamp(1, MAX_WORKERS).min(m);
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<SampleOutcome, PipelineError>>>> = Mutex::new((0..m).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let index = next.fetch_add(1, Ordering::Relaxed);
                if index >= m {
                    break;
                }
                let outcome = run_sample(job, &params, backend, index);
                if outcome.is_err() {
                    abort.store(true, Ordering::Relaxed);
                }
                slots.lock().unwrap_or_else(|e| e.into_inner())[index] = Some(outcome);
            });
        }
    });

    let mut reports = Vec::with_capacity(m);
    let mut paths = Vec::new();
    let mut usage = Usage::default();
    for slot in slots.into_inner().unwrap_or_else(|e| e.into_inner()) {
        // An empty slot means a worker stopped early after some sample failed;
        // that error is reported below in index order.
        let Some(outcome) = slot else { continue };
        let outcome = outcome?;
        usage += outcome.usage;
        if let Some(values) = outcome.values {
            paths.push(values);
        }
        reports.push(outcome.report);
    }

    let valid = paths.len();
    let required = job.required_valid();
    if valid < required {
        return Err(PipelineError::InsufficientSamples { valid, required, total: m });
    }
    let samples = SamplePaths::new(paths)?;
    let point = aggregate_samples(&samples, &s.quantile_levels)?;

    let manifest = RunManifest {
        code_version: crate::VERSION.to_owned(),
        rng: RNG_IDENTITY.to_owned(),
        seed: s.seed,
        backend: backend.identity(),
        history_name: job.history.name().to_owned(),
        history_len: job.history.len(),
        horizon: job.horizon,
        noise: s.noise,
        codec: s.codec.clone(),
        params,
        prompt_style: s.prompt_style,
        samples: m,
        fresh_noise_per_sample: s.fresh_noise_per_sample,
        retries_per_sample: s.retries_per_sample,
        scaler_fit: s.scaler_fit,
        scaler_formula: if s.codec.signed {
            "offset = 0; scale = quantile(|x|, scale_quantile)".into()
        } else {
            "offset = min - offset_beta * (max - min); scale = quantile(x - offset, scale_quantile)".into()
        },
        started_at: None,
        finished_at: None,
    };

    Ok(ForecastResult { point, samples, valid_samples: valid, sample_reports: reports, usage, manifest })
}
