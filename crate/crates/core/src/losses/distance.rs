//! Distance-map regularizers, the combined distance objective and the
//! mapping from decoder sigmoid outputs to metric distance.

use crate::buffer::{DistanceMap, ImageBuffer, Mask, Plane};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::LossWeights;

/// Edge-aware smoothness of a distance map.
///
/// Distances are divided by their mean, then absolute finite differences in
/// `x` and `y` are weighted by `exp(-|dI|)` (image gradient averaged over
/// channels). Returns `mean_x + mean_y`, each mean taken over neighbor pairs
/// whose two distances are valid.
pub fn smoothness<T: Real>(dist: &DistanceMap<T>, image: &ImageBuffer<T>) -> Result<T> {
    let (w, h) = (dist.width(), dist.height());
    if image.width() != w || image.height() != h {
        return Err(Error::size("distance map and image differ in size"));
    }
    let (sum, n) = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| dist.is_valid(x, y))
        .fold((T::zero(), 0usize), |(s, n), (x, y)| (s + dist.get(x, y), n + 1));
    if n == 0 {
        return Err(Error::Degenerate("no valid distances for smoothness".into()));
    }
    let mean = sum / T::from_usize_lossy(n);
    if !(mean > T::zero()) {
        return Err(Error::Degenerate("mean distance is zero".into()));
    }
    let ch = T::from_usize_lossy(image.channels());
    let edge = |x0: usize, y0: usize, x1: usize, y1: usize| -> Option<T> {
        if !(dist.is_valid(x0, y0) && dist.is_valid(x1, y1)) {
            return None;
        }
        let dd = ((dist.get(x1, y1) - dist.get(x0, y0)) / mean).abs();
        let di = (0..image.channels()).fold(T::zero(), |acc, c| {
            acc + (image.get(x1, y1, c) - image.get(x0, y0, c)).abs()
        }) / ch;
        Some(dd * (-di).exp())
    };
    let mean_of = |terms: Vec<T>| -> T {
        if terms.is_empty() {
            T::zero()
        } else {
            let n = T::from_usize_lossy(terms.len());
            terms.into_iter().fold(T::zero(), |a, b| a + b) / n
        }
    };
    let gx: Vec<T> = (0..h)
        .flat_map(|y| (0..w.saturating_sub(1)).map(move |x| (x, y)))
        .filter_map(|(x, y)| edge(x, y, x + 1, y))
        .collect();
    let gy: Vec<T> = (0..h.saturating_sub(1))
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter_map(|(x, y)| edge(x, y, x, y + 1))
        .collect();
    Ok(mean_of(gx) + mean_of(gy))
}

/// Symmetric relative difference `|a - b| / (a + b)`, in `[0, 1)` for
/// positive distances. `None` when both are zero.
pub fn symmetric_relative<T: Real>(a: T, b: T) -> Option<T> {
    let s = a + b;
    (s != T::zero()).then(|| (a - b).abs() / s)
}

/// Cross-sequence distance consistency with the symmetric relative term.
pub fn distance_consistency<T: Real>(
    target: &DistanceMap<T>,
    warped: &DistanceMap<T>,
    mask: Option<&Mask>,
) -> Result<T> {
    distance_consistency_with(target, warped, mask, symmetric_relative)
}

/// Mean of `term(d_t, d_warped)` over pixels valid in both maps and set in
/// `mask`. Pixels where `term` returns `None` are skipped.
pub fn distance_consistency_with<T: Real>(
    target: &DistanceMap<T>,
    warped: &DistanceMap<T>,
    mask: Option<&Mask>,
    term: impl Fn(T, T) -> Option<T>,
) -> Result<T> {
    let (w, h) = (target.width(), target.height());
    if warped.width() != w || warped.height() != h {
        return Err(Error::size("distance maps differ in size"));
    }
    if let Some(m) = mask {
        if m.width() != w || m.height() != h {
            return Err(Error::size("mask does not match distance maps"));
        }
    }
    let mut sum = T::zero();
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if !(target.is_valid(x, y) && warped.is_valid(x, y)) || mask.is_some_and(|m| m.get(x, y) == 0) {
                continue;
            }
            if let Some(v) = term(target.get(x, y), warped.get(x, y)) {
                sum = sum + v;
                n += 1;
            }
        }
    }
    Ok(if n == 0 { T::zero() } else { sum / T::from_usize_lossy(n) })
}

/// Spatially averaged components of the distance objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceLossParts<T> {
    pub reconstruction: T,
    pub smoothness: T,
    pub consistency: T,
}

/// `L_r + beta L_s + gamma L_dc`.
pub fn total_distance_loss<T: Real>(parts: &DistanceLossParts<T>, w: &LossWeights<T>) -> T {
    parts.reconstruction + w.beta * parts.smoothness + w.gamma * parts.consistency
}

/// How the decoder's sigmoid output maps to distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmoidMapping {
    /// `D = m s + n`, used for fisheye Euclidean distance.
    Direct,
    /// `D = 1 / (m s + n)`, used for pinhole depth.
    Inverse,
}

pub const MIN_DISTANCE: f64 = 0.1;
pub const MAX_DISTANCE: f64 = 100.0;

pub fn sigmoid_to_distance_value<T: Real>(s: T, mode: SigmoidMapping) -> Result<T> {
    if !(s >= T::zero() && s <= T::one()) {
        return Err(Error::OutOfRange {
            what: "sigmoid output must lie in [0, 1]".into(),
            value: s.as_f64(),
        });
    }
    let (lo, hi) = (T::lit(MIN_DISTANCE), T::lit(MAX_DISTANCE));
    Ok(match mode {
        SigmoidMapping::Direct => (hi - lo) * s + lo,
        SigmoidMapping::Inverse => {
            let (n, m) = (T::one() / hi, T::one() / lo - T::one() / hi);
            T::one() / (m * s + n)
        }
    })
}

pub fn sigmoid_to_distance<T: Real>(s: &Plane<T>, mode: SigmoidMapping) -> Result<DistanceMap<T>> {
    let values = s
        .data()
        .iter()
        .map(|&v| sigmoid_to_distance_value(v, mode))
        .collect::<Result<Vec<_>>>()?;
    DistanceMap::new(s.width(), s.height(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_distance_is_smooth() {
        let d = DistanceMap::new(4, 3, vec![7.0; 12]).unwrap();
        let img = ImageBuffer::gray_from_fn(4, 3, |x, y| ((x + y) % 2) as f64);
        assert_eq!(smoothness(&d, &img).unwrap(), 0.0);
    }

    #[test]
    fn edges_discount_smoothness() {
        let d = DistanceMap::from_fn(6, 4, |x, _| 1.0 + x as f64).unwrap();
        let flat = ImageBuffer::gray_from_fn(6, 4, |_, _| 0.5);
        let busy = ImageBuffer::gray_from_fn(6, 4, |x, _| (x % 2) as f64);
        assert!(smoothness(&d, &flat).unwrap() > smoothness(&d, &busy).unwrap());
    }

    #[test]
    fn smoothness_is_scale_invariant() {
        let d = DistanceMap::from_fn(5, 5, |x, y| 1.0 + (x * x + 2 * y) as f64 * 0.3).unwrap();
        let img = ImageBuffer::gray_from_fn(5, 5, |x, y| ((x * 3 + y) % 4) as f64 / 4.0);
        let a = smoothness(&d, &img).unwrap();
        let b = smoothness(&d.scaled(3.7).unwrap(), &img).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn consistency_examples() {
        let d: DistanceMap<f64> = DistanceMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(distance_consistency(&d, &d, None).unwrap(), 0.0);
        let d3 = d.scaled(3.0).unwrap();
        assert!((distance_consistency(&d, &d3, None).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(symmetric_relative(0.0f64, 0.0), None);
    }

    #[test]
    fn total_examples() {
        let parts: DistanceLossParts<f64> = DistanceLossParts {
            reconstruction: 1.0,
            smoothness: 2.0,
            consistency: 3.0,
        };
        let mut w = LossWeights::default();
        w.beta = 0.5;
        w.gamma = 0.1;
        assert!((total_distance_loss(&parts, &w) - 2.3).abs() < 1e-15);
        w.beta = 0.0;
        w.gamma = 0.0;
        assert_eq!(total_distance_loss(&parts, &w), 1.0);
    }

    #[test]
    fn sigmoid_endpoints() {
        use SigmoidMapping::*;
        assert_eq!(sigmoid_to_distance_value(0.0, Direct).unwrap(), 0.1);
        assert_eq!(sigmoid_to_distance_value(1.0, Direct).unwrap(), 100.0);
        assert_eq!(sigmoid_to_distance_value(0.0, Inverse).unwrap(), 100.0);
        assert_eq!(sigmoid_to_distance_value(1.0, Inverse).unwrap(), 0.1);
        assert!(sigmoid_to_distance_value(1.5, Direct).is_err());
        assert!(sigmoid_to_distance_value(-0.1, Inverse).is_err());
    }
}
