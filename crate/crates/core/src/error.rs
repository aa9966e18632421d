use thiserror::Error;

use crate::aggregate::AggregationError;
use crate::backend::BackendError;
use crate::bench::BenchError;
use crate::codec::CodecError;
use crate::noise::NoiseError;
use crate::pipeline::PipelineError;
use crate::series::{SeriesError, SplitError};
use crate::synth::SynthError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Umbrella error for callers that do not care which stage failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Bench(#[from] BenchError),
}
