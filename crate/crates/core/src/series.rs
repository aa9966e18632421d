//! Univariate series and history/target splitting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series `{0}` is empty")]
    Empty(String),
    #[error("series `{name}` has a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("series of length {len} is too short for {spec}")]
    TooShort { len: usize, spec: String },
    #[error("invalid split: {0}")]
    Invalid(String),
}

/// An ordered run of finite observations. Time is implicit: index `t` is the
/// `t`-th observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frequency: Option<String>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self, SeriesError> {
        let name = name.into();
        if values.is_empty() {
            return Err(SeriesError::Empty(name));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { name, index });
        }
        Ok(Self { name, frequency: None, values })
    }

    pub fn with_frequency(mut self, frequency: impl Into<String>) -> Self {
        self.frequency = Some(frequency.into());
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frequency(&self) -> Option<&str> {
        self.frequency.as_deref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Population standard deviation (divides by `T`).
    pub fn std_dev(&self) -> f64 {
        population_std(&self.values)
    }

    /// Same name and frequency, new values. Values must be finite.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Result<Self, SeriesError> {
        let mut out = TimeSeries::new(self.name.clone(), values)?;
        out.frequency = self.frequency.clone();
        Ok(out)
    }
}

pub(crate) fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// How to carve a series into a history (prompt) and a held-out target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum SplitSpec {
    /// History share in (0, 1); history length is `ceil(fraction * T)`.
    Fraction(f64),
    /// The last `H` points form the target.
    Horizon(usize),
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fraction(0.8)
    }
}

impl SplitSpec {
    /// Length of the history for a series of `len` points.
    pub fn history_len(&self, len: usize) -> Result<usize, SplitError> {
        let history = match *self {
            SplitSpec::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(SplitError::Invalid(format!("fraction {f} is not in (0, 1)")));
                }
                (f * len as f64).ceil() as usize
            }
            SplitSpec::Horizon(h) => {
                if h == 0 {
                    return Err(SplitError::Invalid("horizon must be positive".into()));
                }
                len.saturating_sub(h)
            }
        };
        if history == 0 || history >= len {
            return Err(SplitError::TooShort { len, spec: self.to_string() });
        }
        Ok(history)
    }
}

impl std::fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SplitSpec::Fraction(x) => write!(f, "frac:{x}"),
            SplitSpec::Horizon(h) => write!(f, "horizon:{h}"),
        }
    }
}

impl std::str::FromStr for SplitSpec {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SplitError::Invalid(format!("expected frac:<x> or horizon:<H>, got `{s}`"));
        let (mode, value) = s.split_once(':').ok_or_else(bad)?;
        match mode.trim() {
            "frac" | "fraction" => value.trim().parse().map(SplitSpec::Fraction).map_err(|_| bad()),
            "horizon" => value.trim().parse().map(SplitSpec::Horizon).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Split into `(history, target)` with `history ++ target == series`.
pub fn split_series(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries), SplitError> {
    let cut = spec.history_len(series.len())?;
    let (head, tail) = series.values().split_at(cut);
    // Both halves are nonempty slices of a validated series.
    let history = series.with_values(head.to_vec()).expect("validated");
    let target = series.with_values(tail.to_vec()).expect("validated");
    Ok((history, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> TimeSeries {
        TimeSeries::new("ramp", (1..=n).map(|v| v as f64).collect()).unwrap()
    }

    #[test]
    fn fraction_split_takes_ceil_history() {
        let (h, t) = split_series(&ramp(10), SplitSpec::Fraction(0.8)).unwrap();
        assert_eq!(h.values(), &[1., 2., 3., 4., 5., 6., 7., 8.]);
        assert_eq!(t.values(), &[9., 10.]);

        let (h, t) = split_series(&ramp(144), SplitSpec::Fraction(0.8)).unwrap();
        assert_eq!((h.len(), t.len()), (116, 28));
    }

    #[test]
    fn horizon_longer_than_series_fails() {
        let err = split_series(&ramp(10), SplitSpec::Horizon(30)).unwrap_err();
        assert!(matches!(err, SplitError::TooShort { len: 10, .. }));
        assert!(split_series(&ramp(30), SplitSpec::Horizon(30)).is_err());
    }

    #[test]
    fn horizon_split_keeps_last_points() {
        let (h, t) = split_series(&ramp(267), SplitSpec::Horizon(30)).unwrap();
        assert_eq!(h.len(), 237);
        assert_eq!(t.len(), 30);
        assert_eq!(t.values()[0], 238.0);
    }

    #[test]
    fn fraction_that_leaves_no_target_fails() {
        assert!(split_series(&ramp(3), SplitSpec::Fraction(0.9)).is_err());
        assert!(split_series(&ramp(3), SplitSpec::Fraction(1.0)).is_err());
        assert!(split_series(&ramp(1), SplitSpec::Horizon(1)).is_err());
    }

    #[test]
    fn rejects_bad_series() {
        assert!(TimeSeries::new("x", vec![]).is_err());
        assert_eq!(
            TimeSeries::new("x", vec![1.0, f64::NAN]).unwrap_err(),
            SeriesError::NonFinite { name: "x".into(), index: 1 }
        );
    }

    #[test]
    fn split_spec_parses_cli_form() {
        assert_eq!("frac:0.8".parse::<SplitSpec>().unwrap(), SplitSpec::Fraction(0.8));
        assert_eq!("horizon:30".parse::<SplitSpec>().unwrap(), SplitSpec::Horizon(30));
        assert!("80%".parse::<SplitSpec>().is_err());
    }
}
