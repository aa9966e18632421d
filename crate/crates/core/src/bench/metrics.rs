use serde::{Deserialize, Serialize};

use super::BenchError;

/// Which values set the min-max range before scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    None,
    /// History and target together.
    #[default]
    MinmaxFull,
    MinmaxHistory,
}

impl NormalizationMode {
    /// The concrete map for one forecast.
    pub fn resolve(self, history: &[f64], target: &[f64]) -> Normalization {
        let range = |xs: &mut dyn Iterator<Item = f64>| {
            xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        match self {
            NormalizationMode::None => Normalization::None,
            NormalizationMode::MinmaxFull => {
                let (lo, hi) = range(&mut history.iter().chain(target).copied());
                Normalization::MinMax { lo, hi, mode: self }
            }
            NormalizationMode::MinmaxHistory => {
                let (lo, hi) = range(&mut history.iter().copied());
                Normalization::MinMax { lo, hi, mode: self }
            }
        }
    }
}

impl NormalizationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::MinmaxFull => "minmax_full",
            Self::MinmaxHistory => "minmax_history",
        }
    }
}

impl std::str::FromStr for NormalizationMode {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "minmax_full" => Ok(Self::MinmaxFull),
            "minmax_history" => Ok(Self::MinmaxHistory),
            _ => Err(BenchError::Config(format!("unknown normalization `{s}` (none, minmax_full, minmax_history)"))),
        }
    }
}

/// `x -> (x - lo) / (hi - lo)`, applied to predictions and truth alike.
/// A zero range only subtracts `lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Normalization {
    None,
    MinMax { lo: f64, hi: f64, mode: NormalizationMode },
}

impl Normalization {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Normalization::None => x,
            Normalization::MinMax { lo, hi, .. } => {
                let range = hi - lo;
                if range > 0.0 {
                    (x - lo) / range
                } else {
                    x - lo
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub mae: f64,
    pub normalization: Normalization,
    /// Normalized `pred - truth` per step.
    pub per_step_errors: Vec<f64>,
}

pub fn compute_metrics(pred: &[f64], truth: &[f64], normalization: &Normalization) -> Result<MetricReport, BenchError> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(BenchError::LengthMismatch { pred: pred.len(), truth: truth.len() });
    }
    if let Some(i) = pred.iter().chain(truth).position(|x| !x.is_finite()) {
        return Err(BenchError::NonFinite(i % pred.len()));
    }
    if let Normalization::MinMax { lo, hi, .. } = normalization {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(BenchError::Config(format!("bad normalization range [{lo}, {hi}]")));
        }
    }
    let errors: Vec<f64> =
        pred.iter().zip(truth).map(|(&p, &y)| normalization.apply(p) - normalization.apply(y)).collect();
    let n = errors.len() as f64;
    Ok(MetricReport {
        mse: errors.iter().map(|e| e * e).sum::<f64>() / n,
        mae: errors.iter().map(|e| e.abs()).sum::<f64>() / n,
        normalization: *normalization,
        per_step_errors: errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_computed_values() {
        let r = compute_metrics(&[1.0, 2.0], &[0.0, 0.0], &Normalization::None).unwrap();
        assert_eq!((r.mse, r.mae), (2.5, 1.5));
        let r = compute_metrics(&[4.0, 5.0], &[4.0, 5.0], &Normalization::None).unwrap();
        assert_eq!((r.mse, r.mae), (0.0, 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            compute_metrics(&[1.0], &[0.0, 0.0], &Normalization::None),
            Err(BenchError::LengthMismatch { pred: 1, truth: 2 })
        ));
        assert!(matches!(
            compute_metrics(&[1.0, f64::NAN], &[0.0, 0.0], &Normalization::None),
            Err(BenchError::NonFinite(1))
        ));
    }

    #[test]
    fn minmax_full_uses_history_and_target() {
        let n = NormalizationMode::MinmaxFull.resolve(&[0.0, 5.0], &[10.0]);
        assert_eq!(n, Normalization::MinMax { lo: 0.0, hi: 10.0, mode: NormalizationMode::MinmaxFull });
        let r = compute_metrics(&[6.0], &[5.0], &n).unwrap();
        assert!((r.mae - 0.1).abs() < 1e-15);
        let n = NormalizationMode::MinmaxHistory.resolve(&[0.0, 5.0], &[10.0]);
        let r = compute_metrics(&[6.0], &[5.0], &n).unwrap();
        assert!((r.mae - 0.2).abs() < 1e-15);
    }

    #[test]
    fn constant_range_only_shifts() {
        let n = NormalizationMode::MinmaxFull.resolve(&[3.0, 3.0], &[3.0]);
        let r = compute_metrics(&[4.0], &[3.0], &n).unwrap();
        assert_eq!(r.mae, 1.0);
    }

    proptest! {
        #[test]
        fn mae_bounded_by_root_mse_and_sign_symmetric(
            pairs in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6), 1..64)
        ) {
            let (p, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let r = compute_metrics(&p, &y, &Normalization::None).unwrap();
            prop_assert!(r.mse >= 0.0 && r.mae >= 0.0);
            prop_assert!(r.mae <= r.mse.sqrt() * (1.0 + 1e-12) + 1e-300);
            let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<_>>();
            let s = compute_metrics(&neg(&p), &neg(&y), &Normalization::None).unwrap();
            prop_assert_eq!(s.mse, r.mse);
            prop_assert_eq!(s.mae, r.mae);
        }
    }
}
