//! Contamination-free benchmark series drawn from Gaussian-process priors.

mod kernel;

pub use kernel::{jittered_cholesky, kernel_matrix, unit_grid, KernelSpec, JITTER_MAX, JITTER_START};

use std::path::Path;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{nested_index, substream, RNG_IDENTITY};
use crate::series::TimeSeries;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis request: {0}")]
    Config(String),
    #[error("{n}x{n} kernel matrix is not positive definite even with jitter {max_jitter:e}")]
    Cholesky { n: usize, max_jitter: f64 },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const DEFAULT_LENGTH: usize = 430;
pub const DEFAULT_HOLDOUT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSeries {
    pub series: TimeSeries,
    pub kernel: KernelSpec,
    pub seed: u64,
    /// RNG stream the standard-normal draws came from.
    pub stream: u64,
    pub jitter: f64,
    /// Trailing points held out as the forecast target.
    pub holdout: usize,
}

/// `count` prior draws `L z` over `grid`, series `i` on stream `i`.
pub fn sample_gp(spec: &KernelSpec, grid: &[f64], count: usize, seed: u64) -> Result<Vec<SyntheticSeries>, SynthError> {
    sample_gp_on(spec, grid, count, seed, 0)
}

fn sample_gp_on(
    spec: &KernelSpec,
    grid: &[f64],
    count: usize,
    seed: u64,
    outer: u32,
) -> Result<Vec<SyntheticSeries>, SynthError> {
    let k = kernel_matrix(spec, grid)?;
    let (l, jitter) = jittered_cholesky(&k)?;
    let n = grid.len();
    let inner = u32::try_from(count).map_err(|_| SynthError::Config("count exceeds 2^32".into()))?;
    (0..inner)
        .map(|i| {
            let stream = nested_index(outer, i);
            let values = draw(&l, n, &mut substream(seed, stream));
            let series = TimeSeries::new(format!("{}_{i:04}", spec.name()), values)
                .map_err(|e| SynthError::Config(e.to_string()))?;
            Ok(SyntheticSeries { series, kernel: *spec, seed, stream, jitter, holdout: 0 })
        })
        .collect()
}

fn draw(l: &DMatrix<f64>, n: usize, rng: &mut crate::rng::Rng) -> Vec<f64> {
    let z: Vec<f64> = StandardNormal.sample_iter(rng).take(n).collect();
    (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub kernel: KernelSpec,
    pub series_index: usize,
    pub stream: u64,
    pub jitter: f64,
    pub raw_min: f64,
    pub raw_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub count: usize,
    pub length: usize,
    pub holdout: usize,
    pub grid: String,
    pub rng: String,
    pub normalization: String,
    pub csv_header: String,
    pub series: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CSV_HEADER: &str = "t,value,value_raw,is_holdout";

/// Write `count` series per kernel as CSV plus `manifest.json`.
///
/// `value` is min-max normalized to [0, 1] over the whole series; the raw
/// draw is kept in `value_raw`; `is_holdout` is 1 on the last `holdout` rows.
pub fn generate_benchmark(
    kernels: &[KernelSpec],
    count: usize,
    length: usize,
    holdout: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<BenchmarkManifest, SynthError> {
    if length == 0 {
        return Err(SynthError::Config("length must be positive".into()));
    }
    if holdout >= length {
        return Err(SynthError::Config(format!("holdout {holdout} must be shorter than length {length}")));
    }
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SynthError::Io { path, source }
    };
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;

    let grid = unit_grid(length);
    let mut entries = Vec::with_capacity(kernels.len() * count);
    for spec in kernels {
        let outer = KernelSpec::NAMES.iter().position(|n| *n == spec.name()).expect("every kernel has a name") as u32;
        let draws = if count == 0 { Vec::new() } else { sample_gp_on(spec, &grid, count, seed, outer)? };
        for (i, s) in draws.into_iter().enumerate() {
            let file = format!("{}_{i:04}.csv", spec.name());
            let path = out_dir.join(&file);
            let (lo, hi) = (s.series.min(), s.series.max());
            std::fs::write(&path, render_csv(s.series.values(), holdout)).map_err(io(&path))?;
            entries.push(ManifestEntry {
                file,
                kernel: *spec,
                series_index: i,
                stream: s.stream,
                jitter: s.jitter,
                raw_min: lo,
                raw_max: hi,
            });
        }
    }

    let manifest = BenchmarkManifest {
        schema_version: 1,
        seed,
        count,
        length,
        holdout,
        grid: format!("uniform on [0, 1], {length} points"),
        rng: RNG_IDENTITY.into(),
        normalization: "minmax over full series; constant series map to 0".into(),
        csv_header: CSV_HEADER.into(),
        series: entries,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("plain struct");
    std::fs::write(&path, json + "\n").map_err(io(&path))?;
    Ok(manifest)
}

fn render_csv(raw: &[f64], holdout: usize) -> String {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let cut = raw.len() - holdout;
    let mut out = String::with_capacity(raw.len() * 48);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, &x) in raw.iter().enumerate() {
        let norm = if range > 0.0 { (x - lo) / range } else { 0.0 };
        out.push_str(&format!("{},{norm},{x},{}\n", i + 1, u8::from(i >= cut)));
    }
    out
}
