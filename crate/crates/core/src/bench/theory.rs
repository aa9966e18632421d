//! Monte-Carlo check of the second-order expansion
//! `E[f(x + eps)] - f(x) = (sigma^2 / 2) tr(H)` for `eps ~ N(0, sigma^2 I)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::rng::substream;

/// Fewer draws than this are rejected.
pub const MIN_DRAWS: usize = 10_000;

pub trait TestFunction: Sync {
    fn describe(&self) -> String;
    fn dimension(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    /// Trace of the Hessian at `x`.
    fn hessian_trace(&self, x: &DVector<f64>) -> f64;
    /// `f(x + eps) - f(x)`.
    fn gap(&self, x: &DVector<f64>, eps: &DVector<f64>) -> f64 {
        self.value(&(x + eps)) - self.value(x)
    }
    fn is_concave(&self) -> bool {
        false
    }
}

/// `f(x) = -x^T A x / 2` with `A` symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcaveQuadratic {
    a: DMatrix<f64>,
}

impl ConcaveQuadratic {
    pub fn new(a: DMatrix<f64>) -> Result<Self, BenchError> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(BenchError::Config(format!("A must be square and nonempty, got {}x{}", a.nrows(), a.ncols())));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(BenchError::Config("A has non-finite entries".into()));
        }
        let scale = a.amax().max(f64::MIN_POSITIVE);
        if (&a - a.transpose()).amax() > 1e-12 * scale {
            return Err(BenchError::Config("A is not symmetric".into()));
        }
        let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
        if min_eig < -1e-10 * scale {
            return Err(BenchError::Config(format!(
                "A is not positive semidefinite (smallest eigenvalue {min_eig:e})"
            )));
        }
        Ok(Self { a })
    }

    pub fn identity(d: usize) -> Result<Self, BenchError> {
        Self::new(DMatrix::identity(d, d))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl TestFunction for ConcaveQuadratic {
    fn describe(&self) -> String {
        let d = self.a.nrows();
        if self.a == DMatrix::identity(d, d) {
            format!("concave_quadratic(A = I_{d})")
        } else {
            format!("concave_quadratic(A: {d}x{d}, tr {})", self.a.trace())
        }
    }

    fn dimension(&self) -> usize {
        self.a.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        -0.5 * x.dot(&(&self.a * x))
    }

    fn hessian_trace(&self, _x: &DVector<f64>) -> f64 {
        -self.a.trace()
    }

    /// `-x^T A eps - eps^T A eps / 2`, without cancellation between two
    /// large values.
    fn gap(&self, x: &DVector<f64>, eps: &DVector<f64>) -> f64 {
        let a_eps = &self.a * eps;
        -x.dot(&a_eps) - 0.5 * eps.dot(&a_eps)
    }

    fn is_concave(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheckConfig {
    pub sigma: f64,
    pub draws: usize,
    pub seed: u64,
    /// Evaluation point; all 0.5 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCheckReport {
    pub function: String,
    pub dimension: usize,
    pub sigma: f64,
    pub draws: usize,
    pub seed: u64,
    pub hessian_trace: f64,
    pub measured_gap: f64,
    pub predicted_gap: f64,
    /// Monte-Carlo standard error of `measured_gap` over antithetic pairs.
    pub standard_error: f64,
    /// `|measured - predicted| / |predicted|`; absent when predicted is 0.
    pub relative_error: Option<f64>,
    pub gap_nonpositive: bool,
    pub within_4se: bool,
}

pub fn theory_check<F: TestFunction + ?Sized>(
    function: &F,
    cfg: &TheoryCheckConfig,
) -> Result<TheoryCheckReport, BenchError> {
    let d = function.dimension();
    if cfg.draws < MIN_DRAWS {
        return Err(BenchError::Config(format!("draws {} below minimum {MIN_DRAWS}", cfg.draws)));
    }
    if !(cfg.sigma >= 0.0 && cfg.sigma.is_finite()) {
        return Err(BenchError::Config(format!("sigma {} must be finite and >= 0", cfg.sigma)));
    }
    let x = match &cfg.point {
        Some(p) if p.len() != d => {
            return Err(BenchError::Config(format!("point has {} coordinates, expected {d}", p.len())))
        }
        Some(p) => DVector::from_column_slice(p),
        None => DVector::from_element(d, 0.5),
    };

    let mut rng = substream(cfg.seed, 0);
    let mut eps = DVector::zeros(d);
    let mut neg = DVector::zeros(d);
    // Each draw averages the antithetic pair (eps, -eps), which cancels the
    // first-order term without bias. Welford running mean and variance.
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..cfg.draws {
        for e in eps.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *e = cfg.sigma * z;
        }
        neg.copy_from(&eps);
        neg.neg_mut();
        let g = 0.5 * (function.gap(&x, &eps) + function.gap(&x, &neg));
        let delta = g - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (g - mean);
    }
    let n = cfg.draws as f64;
    let standard_error = (m2 / (n - 1.0)).sqrt() / n.sqrt();
    let trace = function.hessian_trace(&x);
    let predicted = 0.5 * cfg.sigma * cfg.sigma * trace;
    let diff = (mean - predicted).abs();

    Ok(TheoryCheckReport {
        function: function.describe(),
        dimension: d,
        sigma: cfg.sigma,
        draws: cfg.draws,
        seed: cfg.seed,
        hessian_trace: trace,
        measured_gap: mean,
        predicted_gap: predicted,
        standard_error,
        relative_error: (predicted != 0.0).then(|| diff / predicted.abs()),
        gap_nonpositive: mean <= 0.0,
        within_4se: diff <= 4.0 * standard_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma: f64, draws: usize) -> TheoryCheckConfig {
        TheoryCheckConfig { sigma, draws, seed: 7, point: None }
    }

    #[test]
    fn sigma_zero_gives_exact_zero() {
        let r = theory_check(&ConcaveQuadratic::identity(4).unwrap(), &cfg(0.0, MIN_DRAWS)).unwrap();
        assert_eq!(r.measured_gap, 0.0);
        assert_eq!(r.predicted_gap, 0.0);
        assert!(r.gap_nonpositive && r.within_4se);
        assert_eq!(r.relative_error, None);
    }

    #[test]
    fn flat_function_has_no_gap() {
        let f = ConcaveQuadratic::new(DMatrix::zeros(3, 3)).unwrap();
        let r = theory_check(&f, &cfg(0.3, MIN_DRAWS)).unwrap();
        assert!(r.measured_gap.abs() <= 4.0 * r.standard_error);
    }

    #[test]
    fn small_grid_is_nonpositive_and_within_4se() {
        for d in [1, 3, 8] {
            for sigma in [0.01, 0.1, 0.5] {
                let r = theory_check(&ConcaveQuadratic::identity(d).unwrap(), &cfg(sigma, 50_000)).unwrap();
                assert!(r.gap_nonpositive, "d={d} sigma={sigma}: {r:?}");
                assert!(r.within_4se, "d={d} sigma={sigma}: {r:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let not_psd = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(ConcaveQuadratic::new(not_psd).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(ConcaveQuadratic::new(asym).is_err());
        let f = ConcaveQuadratic::identity(2).unwrap();
        assert!(theory_check(&f, &cfg(0.1, 100)).is_err());
        let mut c = cfg(0.1, MIN_DRAWS);
        c.point = Some(vec![1.0]);
        assert!(theory_check(&f, &c).is_err());
    }

    #[test]
    fn value_matches_quadratic_form() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = ConcaveQuadratic::new(a).unwrap();
        let x = DVector::from_column_slice(&[1.0, -1.0]);
        assert_eq!(f.value(&x), -1.0);
        assert_eq!(f.hessian_trace(&x), -4.0);
        let eps = DVector::from_column_slice(&[0.25, 0.5]);
        let direct = f.value(&(&x + &eps)) - f.value(&x);
        assert!((f.gap(&x, &eps) - direct).abs() < 1e-14);
    }
}
