//! General adaptive robust loss.
//!
//! ```text
//! rho(x; alpha, c) = |alpha - 2| / alpha * (((x / c)^2 / |alpha - 2| + 1)^(alpha / 2) - 1)
//! ```
//!
//! with the removable singularities filled by their limits:
//! `alpha = 2` gives `0.5 (x/c)^2`, `alpha = 0` gives `log(0.5 (x/c)^2 + 1)` and
//! `alpha = -inf` gives `1 - exp(-0.5 (x/c)^2)`. `alpha = 1` is the pseudo-Huber
//! (Charbonnier) loss, `alpha = -2` Geman-McClure.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape `alpha` and scale `c` of the robust loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustParams<T> {
    alpha: T,
    c: T,
}

impl<T: Real> RobustParams<T> {
    /// `alpha` may be any real or `-inf`; `c` must be positive.
    pub fn new(alpha: T, c: T) -> Result<Self> {
        if !(c > T::zero()) || !c.is_finite() {
            return Err(Error::InvalidScale(c.as_f64()));
        }
        if alpha.is_nan() || alpha == T::infinity() {
            return Err(Error::InvalidParameter(format!("robust loss shape alpha = {alpha} is not admissible")));
        }
        Ok(Self { alpha, c })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn c(&self) -> T {
        self.c
    }
}

impl<T: Real> Default for RobustParams<T> {
    /// `alpha = 1, c = 0.01`: Charbonnier-like with a scale of 1% intensity.
    fn default() -> Self {
        Self {
            alpha: T::one(),
            c: T::lit(0.01),
        }
    }
}

pub fn robust_loss<T: Real>(x: T, p: &RobustParams<T>) -> T {
    let (alpha, c) = (p.alpha, p.c);
    let z2 = (x / c) * (x / c);
    let half = T::lit(0.5);
    if alpha == T::lit(2.0) {
        half * z2
    } else if alpha == T::zero() {
        (half * z2).ln_1p()
    } else if alpha == T::neg_infinity() {
        -(-half * z2).exp_m1()
    } else {
        let b = (alpha - T::lit(2.0)).abs();
        // expm1/ln1p keep the generic branch accurate close to the limits
        b / alpha * (half * alpha * (z2 / b).ln_1p()).exp_m1()
    }
}

/// Derivative of [`robust_loss`] with respect to the residual.
pub fn robust_loss_grad<T: Real>(x: T, p: &RobustParams<T>) -> T {
    let (alpha, c) = (p.alpha, p.c);
    let c2 = c * c;
    let z2 = x * x / c2;
    let half = T::lit(0.5);
    if alpha == T::lit(2.0) {
        x / c2
    } else if alpha == T::zero() {
        T::lit(2.0) * x / (x * x + T::lit(2.0) * c2)
    } else if alpha == T::neg_infinity() {
        x / c2 * (-half * z2).exp()
    } else {
        let b = (alpha - T::lit(2.0)).abs();
        x / c2 * ((half * alpha - T::one()) * (z2 / b).ln_1p()).exp()
    }
}

/// Result of the shape/scale grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustFit<T> {
    pub params: RobustParams<T>,
    /// Mean negative log-likelihood at the optimum.
    pub nll: T,
}

/// `log Z(alpha)` where `Z(alpha) = ∫ exp(-rho(x; alpha, 1)) dx`.
///
/// The integral is finite for `alpha >= 0`. It is evaluated with the
/// substitution `x = tan(phi)`, which maps the real line onto a bounded
/// interval with a bounded integrand, followed by a composite midpoint rule.
pub fn log_partition<T: Real>(alpha: T) -> Result<T> {
    if !(alpha >= T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "partition function requires finite alpha >= 0, got {alpha}"
        )));
    }
    let p = RobustParams::new(alpha, T::one())?;
    let n = 40_000usize;
    let h = T::PI() / T::from_usize_lossy(n);
    let mut acc = T::zero();
    for i in 0..n {
        let phi = -T::FRAC_PI_2() + (T::from_usize_lossy(i) + T::lit(0.5)) * h;
        let x = phi.tan();
        let c = phi.cos();
        acc = acc + (-robust_loss(x, &p)).exp() / (c * c);
    }
    Ok((acc * h).ln())
}

/// Grid search of `(alpha, c)` minimizing the mean negative log-likelihood
/// `rho(x; alpha, c) + log(c) + log Z(alpha)` over the residuals.
///
/// Every candidate `alpha` must be `>= 0` (the likelihood is not
/// normalizable below zero).
pub fn fit_robust_params<T: Real>(residuals: &[T], alphas: &[T], scales: &[T]) -> Result<RobustFit<T>> {
    if residuals.is_empty() || alphas.is_empty() || scales.is_empty() {
        return Err(Error::InvalidParameter("grid search needs residuals and candidate values".into()));
    }
    let n = T::from_usize_lossy(residuals.len());
    let mut best: Option<RobustFit<T>> = None;
    for &alpha in alphas {
        let log_z = log_partition(alpha)?;
        for &c in scales {
            let params = RobustParams::new(alpha, c)?;
            let sum = residuals.iter().fold(T::zero(), |acc, &x| acc + robust_loss(x, &params));
            let nll = sum / n + c.ln() + log_z;
            if best.is_none_or(|b| nll < b.nll) {
                best = Some(RobustFit { params, nll });
            }
        }
    }
    Ok(best.expect("non-empty grid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(alpha: f64, c: f64) -> RobustParams<f64> {
        RobustParams::new(alpha, c).unwrap()
    }

    #[test]
    fn zero_residual_is_zero() {
        for alpha in [f64::NEG_INFINITY, -10.0, -2.0, 0.0, 0.5, 1.0, 2.0, 4.0] {
            for c in [0.1, 1.0, 3.0] {
                assert_eq!(robust_loss(0.0, &p(alpha, c)), 0.0);
                assert_eq!(robust_loss_grad(0.0, &p(alpha, c)), 0.0);
            }
        }
    }

    #[test]
    fn spot_values() {
        assert!((robust_loss(1.0, &p(1.0, 1.0)) - (2f64.sqrt() - 1.0)).abs() < 1e-15);
        let gm = |x: f64, c: f64| 2.0 * (x / c).powi(2) / ((x / c).powi(2) + 4.0);
        assert!((robust_loss(2.0, &p(-2.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((robust_loss(0.7, &p(-2.0, 0.3)) - gm(0.7, 0.3)).abs() < 1e-12);
    }

    #[test]
    fn invalid_scale() {
        assert!(matches!(RobustParams::new(1.0, 0.0), Err(Error::InvalidScale(_))));
        assert!(matches!(RobustParams::new(1.0, -1.0), Err(Error::InvalidScale(_))));
        assert!(RobustParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn limits_are_continuous() {
        for &x in &[-3.0, -0.4, 0.2, 1.0, 2.5] {
            let l2 = robust_loss(x, &p(2.0, 1.0));
            for a in [2.0 - 1e-6, 2.0 + 1e-6] {
                assert!((robust_loss(x, &p(a, 1.0)) - l2).abs() < 1e-4);
            }
            let l0 = robust_loss(x, &p(0.0, 1.0));
            for a in [-1e-6, 1e-6] {
                assert!((robust_loss(x, &p(a, 1.0)) - l0).abs() < 1e-4);
            }
            let welsch = robust_loss(x, &p(f64::NEG_INFINITY, 1.0));
            assert!((robust_loss(x, &p(-1e6, 1.0)) - welsch).abs() < 1e-4);
        }
    }

    #[test]
    fn partition_closed_forms() {
        // alpha = 2: Gaussian, alpha = 0: Cauchy with scale sqrt(2)
        let z2 = log_partition(2.0f64).unwrap().exp();
        assert!((z2 - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-7);
        let z0 = log_partition(0.0f64).unwrap().exp();
        assert!((z0 - std::f64::consts::PI * 2f64.sqrt()).abs() < 1e-7);
        assert!(log_partition(-1.0f64).is_err());
    }

    #[test]
    fn grid_search_prefers_heavy_tails_for_outliers() {
        let mut residuals: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.37).sin() * 0.05).collect();
        residuals.extend((0..20).map(|i| if i % 2 == 0 { 3.0 } else { -3.0 }));
        let alphas = [0.0, 0.5, 1.0, 1.5, 2.0];
        let scales = [0.01, 0.02, 0.05, 0.1, 0.2];
        let fit = fit_robust_params(&residuals, &alphas, &scales).unwrap();
        assert!(fit.params.alpha() < 2.0);
        let gaussian: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.731).sin() * 0.1).collect();
        let fit_g = fit_robust_params(&gaussian, &alphas, &scales).unwrap();
        assert!(fit_g.params.alpha() > fit.params.alpha());
    }
}
