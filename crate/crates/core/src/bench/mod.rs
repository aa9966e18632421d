//! Datasets, metrics, baselines, noise-level sweeps, and the perturbation
//! stability check.

mod dataset;
mod metrics;
mod naive;
mod sweep;
mod theory;

pub use dataset::{load_dataset, parse_dataset, Dataset, DatasetFormat, BUILTIN_AIR_PASSENGERS};
pub use metrics::{compute_metrics, MetricReport, Normalization, NormalizationMode};
pub use naive::{naive_forecast, NaiveMethod};
pub use sweep::{
    render_results_csv, render_summary, run_sweep, run_sweep_with, write_report, CellResult, CellStatus, DatasetRef,
    RowEntry, SweepColumn, SweepConfig, SweepReport, SweepRow, REPORT_FILES, REPORT_SCHEMA_VERSION,
};
pub use theory::{theory_check, ConcaveQuadratic, TestFunction, TheoryCheckConfig, TheoryCheckReport, MIN_DRAWS};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("length mismatch: {pred} predictions vs {truth} observations")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("{source_name}: row {row}: {reason}")]
    Schema { source_name: String, row: u64, reason: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),
}

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> BenchError {
    let path = path.display().to_string();
    move |source| BenchError::Io { path, source }
}
