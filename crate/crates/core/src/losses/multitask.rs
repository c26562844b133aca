//! Homoscedastic-uncertainty weighting of the distance and segmentation
//! objectives.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyParams<T> {
    sigma1: T,
    sigma2: T,
}

impl<T: Real> UncertaintyParams<T> {
    pub fn new(sigma1: T, sigma2: T) -> Result<Self> {
        for s in [sigma1, sigma2] {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(Error::NonPositiveSigma(s.as_f64()));
            }
        }
        Ok(Self { sigma1, sigma2 })
    }

    pub fn sigma1(&self) -> T {
        self.sigma1
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }
}

impl<T: Real> Default for UncertaintyParams<T> {
    fn default() -> Self {
        Self {
            sigma1: T::one(),
            sigma2: T::one(),
        }
    }
}

/// `L_tot / (2 s1^2) + L_ce / (2 s2^2) + ln(1 + s1) + ln(1 + s2)`.
pub fn mtl_loss<T: Real>(l_tot: T, l_ce: T, u: &UncertaintyParams<T>) -> T {
    let two = T::lit(2.0);
    let (s1, s2) = (u.sigma1, u.sigma2);
    l_tot / (two * s1 * s1) + l_ce / (two * s2 * s2) + s1.ln_1p() + s2.ln_1p()
}

/// Partial derivatives `(d/ds1, d/ds2)` of [`mtl_loss`].
pub fn mtl_loss_grad<T: Real>(l_tot: T, l_ce: T, u: &UncertaintyParams<T>) -> (T, T) {
    let d = |l: T, s: T| -l / (s * s * s) + T::one() / (T::one() + s);
    (d(l_tot, u.sigma1), d(l_ce, u.sigma2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_sigmas() {
        let v = mtl_loss(2.0, 4.0, &UncertaintyParams::new(1.0, 1.0).unwrap());
        assert!((v - (3.0 + 2.0 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn swap_symmetry() {
        let a: f64 = mtl_loss(0.7, 1.9, &UncertaintyParams::new(0.4, 2.2).unwrap());
        let b = mtl_loss(1.9, 0.7, &UncertaintyParams::new(2.2, 0.4).unwrap());
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive() {
        assert!(matches!(UncertaintyParams::new(0.0, 1.0), Err(Error::NonPositiveSigma(_))));
        assert!(matches!(UncertaintyParams::new(1.0, -2.0), Err(Error::NonPositiveSigma(_))));
    }

    #[test]
    fn gradient_matches_difference() {
        let h = 1e-6;
        for &(lt, lc, s1, s2) in &[(2.0, 4.0, 1.0, 1.0), (0.3, 0.05, 0.5, 1.7), (5.0, 0.2, 2.5, 0.3)] {
            let (g1, g2) = mtl_loss_grad(lt, lc, &UncertaintyParams::new(s1, s2).unwrap());
            let f = |a: f64, b: f64| mtl_loss(lt, lc, &UncertaintyParams::new(a, b).unwrap());
            let n1 = (f(s1 + h, s2) - f(s1 - h, s2)) / (2.0 * h);
            let n2 = (f(s1, s2 + h) - f(s1, s2 - h)) / (2.0 * h);
            assert!((g1 - n1).abs() <= 1e-5 * n1.abs().max(1e-3));
            assert!((g2 - n2).abs() <= 1e-5 * n2.abs().max(1e-3));
        }
    }
}
