//! Noise-augmented zero-shot time-series forecasting with frozen language models.
//!
//! A history is perturbed with scaled zero-mean noise, encoded as digit-token
//! text, continued by a language-model backend `m` times, decoded, and reduced
//! to a per-step median with empirical variance and quantiles.
//!
//! Module map:
//!
//! - [`series`] and [`aggregate`]: domain types, splitting, sample aggregation.
//! - [`noise`]: standardized noise families and injection.
//! - [`codec`]: value to digit-text mapping and the lenient inverse parser.
//! - [`backend`]: OpenAI-compatible HTTP client, mocks, record/replay, cost ledger.
//! - [`pipeline`]: prompt construction and the end-to-end forecast run.
//! - [`synth`]: Gaussian-process benchmark synthesis.
//! - [`bench`]: datasets, metrics, naive baselines, sweeps, and the perturbation
//!   stability check.

pub mod aggregate;
pub mod backend;
pub mod bench;
pub mod codec;
pub mod noise;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod synth;

mod error;

pub use aggregate::{aggregate_samples, PointForecast, QuantileBand, SamplePaths};
pub use error::{Error, Result};
pub use series::{split_series, SplitSpec, TimeSeries};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
