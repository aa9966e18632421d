//! Reduction of `m` sampled continuation paths to a point forecast.
//!
//! Per step the median is the middle order statistic (odd `m`) or the mean of
//! the two middle order statistics (even `m`). Variance uses the population
//! convention (divide by `m`). Quantiles interpolate linearly between the
//! closest ranks, position `(m - 1) * p` in the sorted sample.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AggregationError {
    #[error("no sample paths")]
    NoPaths,
    #[error("sample paths must have at least one step")]
    EmptyPath,
    #[error("path {index} has {len} steps, expected {expected}")]
    RaggedPaths { index: usize, len: usize, expected: usize },
    #[error("path {path} has a non-finite value at step {step}")]
    NonFinite { path: usize, step: usize },
    #[error("quantile level {0} is outside (0, 1)")]
    BadLevel(f64),
}

/// `m` decoded continuation paths of equal length `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePaths {
    paths: Vec<Vec<f64>>,
}

impl SamplePaths {
    pub fn new(paths: Vec<Vec<f64>>) -> Result<Self, AggregationError> {
        let expected = paths.first().ok_or(AggregationError::NoPaths)?.len();
        if expected == 0 {
            return Err(AggregationError::EmptyPath);
        }
        for (index, path) in paths.iter().enumerate() {
            if path.len() != expected {
                return Err(AggregationError::RaggedPaths { index, len: path.len(), expected });
            }
            if let Some(step) = path.iter().position(|v| !v.is_finite()) {
                return Err(AggregationError::NonFinite { path: index, step });
            }
        }
        Ok(Self { paths })
    }

    pub fn paths(&self) -> &[Vec<f64>] {
        &self.paths
    }

    /// Number of paths, `m`.
    pub fn count(&self) -> usize {
        self.paths.len()
    }

    /// Steps per path, `H`.
    pub fn horizon(&self) -> usize {
        self.paths[0].len()
    }

    fn column(&self, step: usize) -> Vec<f64> {
        self.paths.iter().map(|p| p[step]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBand {
    pub level: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub median: Vec<f64>,
    pub variance: Vec<f64>,
    /// Sorted by ascending level.
    pub quantiles: Vec<QuantileBand>,
    pub variance_convention: String,
    pub quantile_rule: String,
}

impl PointForecast {
    pub fn quantile(&self, level: f64) -> Option<&[f64]> {
        self.quantiles.iter().find(|b| b.level == level).map(|b| b.values.as_slice())
    }
}

pub const DEFAULT_QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

pub fn aggregate_samples(samples: &SamplePaths, quantile_levels: &[f64]) -> Result<PointForecast, AggregationError> {
    let mut levels = quantile_levels.to_vec();
    if let Some(&bad) = levels.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        return Err(AggregationError::BadLevel(bad));
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let horizon = samples.horizon();
    let mut median = Vec::with_capacity(horizon);
    let mut variance = Vec::with_capacity(horizon);
    let mut bands: Vec<QuantileBand> =
        levels.iter().map(|&level| QuantileBand { level, values: Vec::with_capacity(horizon) }).collect();

    for step in 0..horizon {
        let mut column = samples.column(step);
        variance.push(population_variance(&column));
        column.sort_by(f64::total_cmp);
        let mid = sorted_median(&column);
        median.push(mid);
        for band in &mut bands {
            let q = if band.level == 0.5 { mid } else { sorted_quantile(&column, band.level) };
            band.values.push(q);
        }
    }

    Ok(PointForecast {
        median,
        variance,
        quantiles: bands,
        variance_convention: "population".into(),
        quantile_rule: "linear-interpolation-between-closest-ranks".into(),
    })
}

/// Median of an ascending slice.
pub fn sorted_median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0
    }
}

/// Quantile of an ascending slice at position `(len - 1) * p`.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    if frac == 0.0 || a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

pub(crate) fn population_variance(values: &[f64]) -> f64 {
    // Shifting by the first value makes identical samples give exactly 0.
    let n = values.len() as f64;
    let shift = values[0];
    let mean = values.iter().map(|v| v - shift).sum::<f64>() / n;
    values.iter().map(|v| (v - shift - mean).powi(2)).sum::<f64>() / n
}
