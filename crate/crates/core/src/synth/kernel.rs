use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use super::SynthError;

/// Covariance function of a zero-mean Gaussian-process prior on a 1-D grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `v * exp(-2 sin^2(pi r / period) / l^2)`
    ExpSineSquared { lengthscale: f64, period: f64, variance: f64 },
    /// `v * t * t'`
    Linear { variance: f64 },
    /// Matérn with half-integer smoothness 0.5, 1.5 or 2.5.
    Matern { lengthscale: f64, nu: f64, variance: f64 },
    /// `v * (t * t' + bias)^degree`
    Polynomial { degree: u32, bias: f64, variance: f64 },
    /// `v * (1 + r^2 / (2 alpha l^2))^(-alpha)`
    RationalQuadratic { lengthscale: f64, alpha: f64, variance: f64 },
    /// `v * exp(-r^2 / (2 l^2))`
    Rbf { lengthscale: f64, variance: f64 },
}

impl KernelSpec {
    pub const NAMES: [&'static str; 6] =
        ["exp_sine_squared", "linear", "matern", "polynomial", "rational_quadratic", "rbf"];

    /// Default parameters relative to the grid span: lengthscale 0.2 span,
    /// period 0.25 span, nu 1.5, degree 2, bias 1, alpha 1, unit variance.
    pub fn default_for(name: &str, span: f64) -> Option<Self> {
        let l = 0.2 * span;
        Some(match name.trim().to_ascii_lowercase().as_str() {
            "exp_sine_squared" | "expsinesquared" | "periodic" => {
                KernelSpec::ExpSineSquared { lengthscale: l, period: 0.25 * span, variance: 1.0 }
            }
            "linear" => KernelSpec::Linear { variance: 1.0 },
            "matern" => KernelSpec::Matern { lengthscale: l, nu: 1.5, variance: 1.0 },
            "polynomial" => KernelSpec::Polynomial { degree: 2, bias: 1.0, variance: 1.0 },
            "rational_quadratic" | "rq" => KernelSpec::RationalQuadratic { lengthscale: l, alpha: 1.0, variance: 1.0 },
            "rbf" => KernelSpec::Rbf { lengthscale: l, variance: 1.0 },
            _ => return None,
        })
    }

    /// All six kernels with defaults for `span`, in [`Self::NAMES`] order.
    pub fn all_defaults(span: f64) -> Vec<Self> {
        Self::NAMES.iter().map(|n| Self::default_for(n, span).expect("known name")).collect()
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::ExpSineSquared { .. } => "exp_sine_squared",
            KernelSpec::Linear { .. } => "linear",
            KernelSpec::Matern { .. } => "matern",
            KernelSpec::Polynomial { .. } => "polynomial",
            KernelSpec::RationalQuadratic { .. } => "rational_quadratic",
            KernelSpec::Rbf { .. } => "rbf",
        }
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self, KernelSpec::Linear { .. } | KernelSpec::Polynomial { .. })
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let positive = |what: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SynthError::Config(format!("{} {what} must be positive, got {v}", self.name())))
            }
        };
        match *self {
            KernelSpec::ExpSineSquared { lengthscale, period, variance } => {
                positive("lengthscale", lengthscale)?;
                positive("period", period)?;
                positive("variance", variance)
            }
            KernelSpec::Linear { variance } => positive("variance", variance),
            KernelSpec::Matern { lengthscale, nu, variance } => {
                positive("lengthscale", lengthscale)?;
                positive("variance", variance)?;
                if [0.5, 1.5, 2.5].contains(&nu) {
                    Ok(())
                } else {
                    Err(SynthError::Config(format!("matern nu must be 0.5, 1.5 or 2.5, got {nu}")))
                }
            }
            KernelSpec::Polynomial { degree, bias, variance } => {
                positive("variance", variance)?;
                if degree == 0 {
                    return Err(SynthError::Config("polynomial degree must be >= 1".into()));
                }
                if bias >= 0.0 && bias.is_finite() {
                    Ok(())
                } else {
                    Err(SynthError::Config(format!("polynomial bias must be >= 0, got {bias}")))
                }
            }
            KernelSpec::RationalQuadratic { lengthscale, alpha, variance } => {
                positive("lengthscale", lengthscale)?;
                positive("alpha", alpha)?;
                positive("variance", variance)
            }
            KernelSpec::Rbf { lengthscale, variance } => {
                positive("lengthscale", lengthscale)?;
                positive("variance", variance)
            }
        }
    }

    pub fn eval(&self, t: f64, u: f64) -> f64 {
        let r = (t - u).abs();
        match *self {
            KernelSpec::ExpSineSquared { lengthscale, period, variance } => {
                let s = (std::f64::consts::PI * r / period).sin();
                variance * (-2.0 * s * s / (lengthscale * lengthscale)).exp()
            }
            KernelSpec::Linear { variance } => variance * t * u,
            KernelSpec::Matern { lengthscale, nu, variance } => {
                let d = r / lengthscale;
                let poly_exp = if nu == 0.5 {
                    (-d).exp()
                } else if nu == 1.5 {
                    let a = 3f64.sqrt() * d;
                    (1.0 + a) * (-a).exp()
                } else {
                    let a = 5f64.sqrt() * d;
                    (1.0 + a + a * a / 3.0) * (-a).exp()
                };
                variance * poly_exp
            }
            KernelSpec::Polynomial { degree, bias, variance } => variance * (t * u + bias).powi(degree as i32),
            KernelSpec::RationalQuadratic { lengthscale, alpha, variance } => {
                variance * (1.0 + r * r / (2.0 * alpha * lengthscale * lengthscale)).powf(-alpha)
            }
            KernelSpec::Rbf { lengthscale, variance } => variance * (-r * r / (2.0 * lengthscale * lengthscale)).exp(),
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), SynthError> {
    if grid.is_empty() {
        return Err(SynthError::Config("grid is empty".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(SynthError::Config("grid has non-finite points".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SynthError::Config("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n x n` covariance matrix over `grid`, built symmetric by construction.
pub fn kernel_matrix(spec: &KernelSpec, grid: &[f64]) -> Result<DMatrix<f64>, SynthError> {
    spec.validate()?;
    validate_grid(grid)?;
    let n = grid.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(grid[i], grid[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `n` points evenly spaced on [0, 1].
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

/// Lower Cholesky factor of `K + jitter * I` and the jitter used. Jitter
/// starts at `1e-8 * trace / n` and grows tenfold up to `1e-4 * trace / n`.
pub fn jittered_cholesky(k: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64), SynthError> {
    let n = k.nrows();
    let mean_diag = if n == 0 { 1.0 } else { k.trace() / n as f64 };
    let unit = if mean_diag > 0.0 && mean_diag.is_finite() { mean_diag } else { 1.0 };
    let mut factor = JITTER_START;
    while factor <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = factor * unit;
        let shifted = k + DMatrix::identity(n, n) * jitter;
        if let Some(chol) = Cholesky::<f64, Dyn>::new(shifted) {
            return Ok((chol.l(), jitter));
        }
        factor *= 10.0;
    }
    Err(SynthError::Cholesky { n, max_jitter: JITTER_MAX * unit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rbf_unit_variance_has_unit_diagonal() {
        let k = kernel_matrix(&KernelSpec::default_for("rbf", 1.0).unwrap(), &unit_grid(9)).unwrap();
        assert!((0..9).all(|i| k[(i, i)] == 1.0));
    }

    #[test]
    fn linear_kernel_is_outer_product() {
        let k = kernel_matrix(&KernelSpec::Linear { variance: 1.0 }, &[1.0, 2.0]).unwrap();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
    }

    #[test]
    fn periodic_kernel_repeats_at_one_period() {
        let spec = KernelSpec::ExpSineSquared { lengthscale: 0.3, period: 0.25, variance: 2.0 };
        let k = kernel_matrix(&spec, &[0.0, 0.25]).unwrap();
        assert!((k[(0, 1)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matern_closed_forms() {
        let m = |nu| KernelSpec::Matern { lengthscale: 1.0, nu, variance: 1.0 };
        assert!((m(0.5).eval(0.0, 1.0) - (-1f64).exp()).abs() < 1e-15);
        let a = 3f64.sqrt();
        assert!((m(1.5).eval(0.0, 1.0) - (1.0 + a) * (-a).exp()).abs() < 1e-15);
        assert_eq!(m(2.5).eval(0.3, 0.3), 1.0);
        assert!(m(2.0).validate().is_err());
    }

    #[test]
    fn rejects_bad_grids_and_params() {
        let rbf = KernelSpec::default_for("rbf", 1.0).unwrap();
        assert!(kernel_matrix(&rbf, &[0.0, 0.0]).is_err());
        assert!(kernel_matrix(&rbf, &[]).is_err());
        assert!(kernel_matrix(&KernelSpec::Rbf { lengthscale: 0.0, variance: 1.0 }, &[0.0]).is_err());
        assert!(KernelSpec::Polynomial { degree: 0, bias: 1.0, variance: 1.0 }.validate().is_err());
    }

    #[test]
    fn low_rank_kernels_factor_with_jitter() {
        let k = kernel_matrix(&KernelSpec::Linear { variance: 1.0 }, &unit_grid(50)).unwrap();
        let (l, jitter) = jittered_cholesky(&k).unwrap();
        assert!(jitter > 0.0);
        let back = &l * l.transpose();
        assert!((back - (k + DMatrix::identity(50, 50) * jitter)).abs().max() < 1e-9);
    }

    #[test]
    fn indefinite_matrix_fails() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(jittered_cholesky(&k), Err(SynthError::Cholesky { n: 2, .. })));
    }

    fn grid_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..0.5, 1..24).prop_map(|steps| {
            let mut t = 0.0;
            steps
                .into_iter()
                .map(|s| {
                    t += s;
                    t
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn symmetric_and_factorizable(grid in grid_strategy(), which in 0usize..6) {
            let spec = KernelSpec::all_defaults(grid[grid.len() - 1].max(0.1))[which];
            let k = kernel_matrix(&spec, &grid).unwrap();
            prop_assert_eq!(&k, &k.transpose());
            prop_assert!(jittered_cholesky(&k).is_ok());
        }

        #[test]
        fn stationary_kernels_are_shift_invariant(
            a in -1000i32..1000, b in -1000i32..1000, shift in -1000i32..1000, which in 0usize..6,
        ) {
            let spec = KernelSpec::all_defaults(100.0)[which];
            prop_assume!(spec.is_stationary());
            // Integer-valued points keep sums exact.
            let (a, b, d) = (f64::from(a), f64::from(b), f64::from(shift));
            prop_assert_eq!(spec.eval(a + d, b + d), spec.eval(a, b));
        }
    }
}
