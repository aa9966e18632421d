//! Zero-mean noise injection, `x~_t = x_t + alpha * sigma_x * z_t`.
//!
//! `z_t` are draws from one of six families, centered by the family's analytic
//! mean and divided by its analytic standard deviation, so every kind has zero
//! mean and unit variance before scaling. `sigma_x` is the population standard
//! deviation of the series being perturbed.
//!
//! Geometric noise uses the number-of-trials convention (support `1, 2, ...`,
//! mean `1/p`). With `p = 1` the family is a point mass and yields all zeros.

use rand::Rng as _;
use rand_distr::{Beta, Distribution, Gamma, Geometric, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Rng;
use crate::series::{population_std, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("invalid noise parameters: {0}")]
    Param(String),
    #[error("cannot scale noise to series `{name}`: {reason}")]
    DegenerateSeries { name: String, reason: String },
}

/// Noise family and its raw parameters. Parameters only shape the draw; the
/// output is always standardized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Gaussian {
        #[serde(default)]
        mean: f64,
        #[serde(default = "one")]
        std: f64,
    },
    Uniform {
        #[serde(default = "minus_one")]
        a: f64,
        #[serde(default = "one")]
        b: f64,
    },
    Laplace {
        #[serde(default)]
        location: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Gamma {
        #[serde(default = "two")]
        shape: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Beta {
        #[serde(default = "two")]
        alpha: f64,
        #[serde(default = "two")]
        beta: f64,
    },
    Geometric {
        #[serde(default = "half")]
        p: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}

impl NoiseKind {
    pub const NAMES: [&'static str; 7] = ["none", "gaussian", "uniform", "laplace", "gamma", "beta", "geometric"];

    /// The family with default parameters, by name.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name.trim().to_ascii_lowercase().as_str() {
            "none" | "original" => NoiseKind::None,
            "gaussian" | "normal" => NoiseKind::Gaussian { mean: 0.0, std: 1.0 },
            "uniform" => NoiseKind::Uniform { a: -1.0, b: 1.0 },
            "laplace" => NoiseKind::Laplace { location: 0.0, scale: 1.0 },
            "gamma" => NoiseKind::Gamma { shape: 2.0, scale: 1.0 },
            "beta" => NoiseKind::Beta { alpha: 2.0, beta: 2.0 },
            "geometric" => NoiseKind::Geometric { p: 0.5 },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Gaussian { .. } => "gaussian",
            NoiseKind::Uniform { .. } => "uniform",
            NoiseKind::Laplace { .. } => "laplace",
            NoiseKind::Gamma { .. } => "gamma",
            NoiseKind::Beta { .. } => "beta",
            NoiseKind::Geometric { .. } => "geometric",
        }
    }

    /// The six perturbing families with default parameters.
    pub fn all_noisy() -> Vec<Self> {
        Self::NAMES[1..].iter().map(|n| Self::from_name(n).expect("known name")).collect()
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(NoiseError::Param(format!("{name} must be positive, got {v}")))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(NoiseError::Param(format!("{name} must be finite, got {v}")))
            }
        };
        match *self {
            NoiseKind::None => Ok(()),
            NoiseKind::Gaussian { mean, std } => {
                finite("gaussian mean", mean)?;
                positive("gaussian std", std)
            }
            NoiseKind::Uniform { a, b } => {
                finite("uniform a", a)?;
                finite("uniform b", b)?;
                if a < b {
                    Ok(())
                } else {
                    Err(NoiseError::Param(format!("uniform needs a < b, got [{a}, {b}]")))
                }
            }
            NoiseKind::Laplace { location, scale } => {
                finite("laplace location", location)?;
                positive("laplace scale", scale)
            }
            NoiseKind::Gamma { shape, scale } => {
                positive("gamma shape", shape)?;
                positive("gamma scale", scale)
            }
            NoiseKind::Beta { alpha, beta } => {
                positive("beta alpha", alpha)?;
                positive("beta beta", beta)
            }
            NoiseKind::Geometric { p } => {
                if p > 0.0 && p <= 1.0 {
                    Ok(())
                } else {
                    Err(NoiseError::Param(format!("geometric p must be in (0, 1], got {p}")))
                }
            }
        }
    }

    /// Analytic (mean, standard deviation) of the raw family.
    pub fn moments(&self) -> (f64, f64) {
        match *self {
            NoiseKind::None => (0.0, 0.0),
            NoiseKind::Gaussian { mean, std } => (mean, std),
            NoiseKind::Uniform { a, b } => ((a + b) / 2.0, (b - a) / 12f64.sqrt()),
            NoiseKind::Laplace { location, scale } => (location, scale * 2f64.sqrt()),
            NoiseKind::Gamma { shape, scale } => (shape * scale, scale * shape.sqrt()),
            NoiseKind::Beta { alpha, beta } => {
                let s = alpha + beta;
                (alpha / s, (alpha * beta / (s * s * (s + 1.0))).sqrt())
            }
            NoiseKind::Geometric { p } => (1.0 / p, (1.0 - p).sqrt() / p),
        }
    }
}

/// A noise family, its scaling factor `alpha`, and the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    /// Constant series pass through unperturbed instead of failing.
    #[serde(default)]
    pub allow_degenerate_passthrough: bool,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, alpha: f64, seed: u64) -> Self {
        Self { kind, alpha, seed, allow_degenerate_passthrough: false }
    }

    pub fn none() -> Self {
        Self::new(NoiseKind::None, 0.0, 0)
    }

    pub fn gaussian(alpha: f64, seed: u64) -> Self {
        Self::new(NoiseKind::Gaussian { mean: 0.0, std: 1.0 }, alpha, seed)
    }

    /// True when injection cannot change the series.
    pub fn is_identity(&self) -> bool {
        self.kind == NoiseKind::None || self.alpha == 0.0
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(NoiseError::Param(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        self.kind.validate()
    }
}

/// `n` i.i.d. draws of the standardized family (zero mean, unit variance).
pub fn standardized_draw(spec: &NoiseSpec, n: usize, rng: &mut Rng) -> Result<Vec<f64>, NoiseError> {
    spec.validate()?;
    let kind = spec.kind;
    let (mean, std) = kind.moments();
    if kind == NoiseKind::None || std == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let param = |e: &dyn std::fmt::Display| NoiseError::Param(e.to_string());
    let raw: Vec<f64> = match kind {
        NoiseKind::None => unreachable!(),
        NoiseKind::Gaussian { mean, std } => {
            let d = Normal::new(mean, std).map_err(|e| param(&e))?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        NoiseKind::Uniform { a, b } => {
            let d = Uniform::new(a, b).map_err(|e| param(&e))?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        NoiseKind::Laplace { location, scale } => (0..n).map(|_| sample_laplace(location, scale, rng)).collect(),
        NoiseKind::Gamma { shape, scale } => {
            let d = Gamma::new(shape, scale).map_err(|e| param(&e))?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        NoiseKind::Beta { alpha, beta } => {
            let d = Beta::new(alpha, beta).map_err(|e| param(&e))?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        NoiseKind::Geometric { p } => {
            // rand_distr counts failures before the first success.
            let d = Geometric::new(p).map_err(|e| param(&e))?;
            d.sample_iter(&mut *rng).take(n).map(|k| k as f64 + 1.0).collect()
        }
    };
    Ok(raw.into_iter().map(|x| (x - mean) / std).collect())
}

fn sample_laplace(location: f64, scale: f64, rng: &mut Rng) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let tail = 1.0 - 2.0 * u.abs();
        if tail > 0.0 {
            return location - scale * u.signum() * tail.ln();
        }
    }
}

/// Perturb `series` with `alpha * sigma_x`-scaled standardized noise.
pub fn inject_noise(series: &TimeSeries, spec: &NoiseSpec, rng: &mut Rng) -> Result<TimeSeries, NoiseError> {
    spec.validate()?;
    if spec.is_identity() {
        return Ok(series.clone());
    }
    let values = series.values();
    let degenerate =
        |reason: &str| NoiseError::DegenerateSeries { name: series.name().to_owned(), reason: reason.to_owned() };
    let sigma_x = population_std(values);
    if values.len() < 2 || sigma_x == 0.0 {
        if spec.allow_degenerate_passthrough {
            return Ok(series.clone());
        }
        return Err(degenerate(if values.len() < 2 {
            "need at least two points to estimate the standard deviation"
        } else {
            "series is constant (standard deviation 0)"
        }));
    }
    let z = standardized_draw(spec, values.len(), rng)?;
    let scale = spec.alpha * sigma_x;
    let noisy: Vec<f64> = values.iter().zip(&z).map(|(x, z)| x + scale * z).collect();
    series.with_values(noisy).map_err(|_| degenerate("perturbed values overflowed"))
}
