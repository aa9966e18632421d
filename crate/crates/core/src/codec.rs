//! Value <-> digit-text mapping.
//!
//! Encoding is three steps per value: affine scaling `y = (x - b) / s`,
//! precision scaling to the integer `v = floor(y * 10^k)`, and rendering `|v|`
//! as base-10 digits joined by the digit separator (with a leading `-` for
//! negative values in signed mode). Steps are joined with the step separator:
//! `[22, 25, 28]` becomes `"2 2, 2 5, 2 8"`.
//!
//! Decoding is deliberately lenient. Model output is split on the step
//! separator, each fragment keeps only digits and `-`, and fragments without
//! digits are dropped and counted. A run fails only if nothing parses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::sorted_quantile;
use crate::series::TimeSeries;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("invalid codec configuration: {0}")]
    Config(String),
    #[error("cannot fit a scaler: {0}")]
    DegenerateSeries(String),
    #[error("value {value} at step {index} does not fit in {max_digits} digits")]
    Overflow { index: usize, value: f64, max_digits: u32 },
    #[error("value {value} at step {index} is negative but the codec is unsigned")]
    NegativeUnsigned { index: usize, value: f64 },
    #[error("non-finite value at step {0}")]
    NonFinite(usize),
    #[error("no steps recovered from {len} bytes of model output")]
    Parse { len: usize },
}

const SIGN: char = '-';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodecConfig {
    /// Decimal digits kept after scaling, `k`.
    pub precision: u32,
    pub base: u32,
    pub signed: bool,
    /// Digits are concatenated instead of separated.
    pub basic: bool,
    /// Quantile of the shifted history that maps to 1.0.
    pub scale_quantile: f64,
    /// Offset below the history minimum, as a share of its range (unsigned only).
    pub offset_beta: f64,
    pub half_bin_correction: bool,
    pub step_separator: String,
    pub digit_separator: String,
    pub max_digits_per_value: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            precision: 3,
            base: 10,
            signed: true,
            basic: false,
            scale_quantile: 0.95,
            offset_beta: 0.3,
            half_bin_correction: true,
            step_separator: ", ".into(),
            digit_separator: " ".into(),
            max_digits_per_value: 10,
        }
    }
}

impl CodecConfig {
    /// Settings for chat-style backends whose tokenizers split digits on their own.
    pub fn basic() -> Self {
        Self { basic: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::Config(m));
        if self.base != 10 {
            return bad(format!("only base 10 is supported, got {}", self.base));
        }
        if self.precision > 10 {
            return bad(format!("precision {} exceeds 10", self.precision));
        }
        if self.max_digits_per_value < self.precision + 1 || self.max_digits_per_value > 18 {
            return bad(format!(
                "max_digits_per_value must be in [precision + 1, 18], got {}",
                self.max_digits_per_value
            ));
        }
        if !(self.scale_quantile > 0.0 && self.scale_quantile <= 1.0) {
            return bad(format!("scale_quantile {} not in (0, 1]", self.scale_quantile));
        }
        if !(self.offset_beta >= 0.0 && self.offset_beta.is_finite()) {
            return bad(format!("offset_beta {} must be >= 0", self.offset_beta));
        }
        let step = self.step_separator.trim();
        if step.is_empty() || step.chars().any(|c| c.is_ascii_digit() || c == SIGN) {
            return bad(format!(
                "step separator {:?} needs a visible non-digit, non-sign character",
                self.step_separator
            ));
        }
        if self.digit_separator.chars().any(|c| c.is_ascii_digit() || c == SIGN || step.contains(c)) {
            return bad(format!(
                "digit separator {:?} clashes with digits or the step separator",
                self.digit_separator
            ));
        }
        Ok(())
    }

    fn bins_per_unit(&self) -> f64 {
        10f64.powi(self.precision as i32)
    }

    /// Token split used by the parser; tolerant of missing or extra spaces.
    fn split_token(&self) -> &str {
        self.step_separator.trim()
    }
}

/// Affine map applied before precision scaling: `y = (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub offset: f64,
    pub scale: f64,
}

impl Scaler {
    pub const IDENTITY: Scaler = Scaler { offset: 0.0, scale: 1.0 };

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y * self.scale + self.offset
    }
}

/// Fit the scaler on a history.
///
/// Unsigned: `b = min - beta * (max - min)`, `s` = `scale_quantile`-quantile
/// of `x - b`. Signed: `b = 0`, `s` = quantile of `|x|`. A zero (or
/// non-finite) quantile falls back to `s = 1`.
pub fn fit_scaler(history: &TimeSeries, config: &CodecConfig) -> Result<Scaler, CodecError> {
    config.validate()?;
    let values = history.values();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CodecError::DegenerateSeries("history has non-finite values".into()));
    }
    let offset = if config.signed {
        0.0
    } else {
        let (lo, hi) = (history.min(), history.max());
        lo - config.offset_beta * (hi - lo)
    };
    let mut shifted: Vec<f64> = values.iter().map(|&x| if config.signed { x.abs() } else { x - offset }).collect();
    shifted.sort_by(f64::total_cmp);
    let q = sorted_quantile(&shifted, config.scale_quantile);
    let scale = if q > 0.0 && q.is_finite() { q } else { 1.0 };
    if !offset.is_finite() {
        return Err(CodecError::DegenerateSeries("history range overflows".into()));
    }
    Ok(Scaler { offset, scale })
}

/// Precision-scaled integer for one already-scaled value.
///
/// `floor` is applied after snapping products that sit within a relative
/// 1e-9 of an integer, so `2.718 * 1000` encodes as 2718 rather than 2717.
fn quantize(y: f64, precision: u32) -> f64 {
    let t = y * 10f64.powi(precision as i32);
    let r = t.round();
    if (t - r).abs() <= 1e-9 * t.abs().max(1.0) {
        r
    } else {
        t.floor()
    }
}

fn render_digits(out: &mut String, magnitude: u64, config: &CodecConfig) {
    let digits = magnitude.to_string();
    if config.basic {
        out.push_str(&digits);
        return;
    }
    for (i, d) in digits.chars().enumerate() {
        if i > 0 {
            out.push_str(&config.digit_separator);
        }
        out.push(d);
    }
}

/// Encode raw values as digit text.
pub fn serialize_values(values: &[f64], scaler: &Scaler, config: &CodecConfig) -> Result<String, CodecError> {
    config.validate()?;
    let limit = 10f64.powi(config.max_digits_per_value as i32);
    let mut out = String::with_capacity(values.len() * (config.precision as usize + 3) * 2);
    for (index, &x) in values.iter().enumerate() {
        if !x.is_finite() {
            return Err(CodecError::NonFinite(index));
        }
        let v = quantize(scaler.forward(x), config.precision);
        if !v.is_finite() || v.abs() >= limit {
            return Err(CodecError::Overflow { index, value: x, max_digits: config.max_digits_per_value });
        }
        if v < 0.0 && !config.signed {
            return Err(CodecError::NegativeUnsigned { index, value: x });
        }
        if index > 0 {
            out.push_str(&config.step_separator);
        }
        if v < 0.0 {
            out.push(SIGN);
        }
        render_digits(&mut out, v.abs() as u64, config);
    }
    Ok(out)
}

pub fn serialize(series: &TimeSeries, scaler: &Scaler, config: &CodecConfig) -> Result<String, CodecError> {
    serialize_values(series.values(), scaler, config)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub requested_steps: usize,
    pub parsed_steps: usize,
    pub discarded_fragments: usize,
    /// Fewer than `requested_steps` values were recovered.
    pub truncated: bool,
    pub raw_text_length: usize,
}

/// Decode at most `horizon` values from model output.
///
/// Blank fragments (for example after a trailing separator) are skipped
/// without being counted as discarded.
pub fn deserialize(
    text: &str,
    scaler: &Scaler,
    config: &CodecConfig,
    horizon: usize,
) -> Result<(Vec<f64>, ParseReport), CodecError> {
    config.validate()?;
    let half = if config.half_bin_correction { 0.5 } else { 0.0 };
    let bins = config.bins_per_unit();
    let mut values = Vec::with_capacity(horizon);
    let mut discarded = 0;

    for fragment in text.split(config.split_token()) {
        if values.len() >= horizon {
            break;
        }
        if fragment.trim().is_empty() {
            continue;
        }
        match parse_fragment(fragment, config.max_digits_per_value) {
            Some(v) => {
                let x = scaler.inverse((v + half) / bins);
                if x.is_finite() {
                    values.push(x);
                } else {
                    discarded += 1;
                }
            }
            None => discarded += 1,
        }
    }

    if values.is_empty() {
        return Err(CodecError::Parse { len: text.len() });
    }
    let report = ParseReport {
        requested_steps: horizon,
        parsed_steps: values.len(),
        discarded_fragments: discarded,
        truncated: values.len() < horizon,
        raw_text_length: text.len(),
    };
    Ok((values, report))
}

/// Signed integer carried by one fragment, ignoring everything except digits
/// and a leading sign marker.
fn parse_fragment(fragment: &str, max_digits: u32) -> Option<f64> {
    let mut negative = false;
    let mut seen_digit = false;
    let mut count = 0u32;
    let mut magnitude: u64 = 0;
    for c in fragment.chars() {
        if let Some(d) = c.to_digit(10).filter(|_| c.is_ascii_digit()) {
            seen_digit = true;
            count += 1;
            if count > max_digits {
                return None;
            }
            magnitude = magnitude * 10 + u64::from(d);
        } else if c == SIGN && !seen_digit {
            negative = true;
        }
    }
    if !seen_digit {
        return None;
    }
    let v = magnitude as f64;
    Some(if negative { -v } else { v })
}
