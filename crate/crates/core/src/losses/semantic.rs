//! Semantic cross-entropy and dynamic-object masking.

use std::collections::BTreeSet;

use crate::buffer::{ImageBuffer, LabelMap, Mask, Plane};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const LOG_CLAMP: f64 = 1e-12;
pub const NORMALIZATION_TOL: f64 = 1e-6;
/// IoU of the dynamic regions below which a frame counts as mostly moving.
pub const MOTION_IOU_THRESHOLD: f64 = 0.5;

fn check_normalized<T: Real>(posteriors: &ImageBuffer<T>) -> Result<()> {
    let ch = posteriors.channels();
    for (i, px) in posteriors.data().chunks(ch).enumerate() {
        let sum = px.iter().fold(T::zero(), |a, &b| a + b);
        if !((sum - T::one()).abs() <= T::lit(NORMALIZATION_TOL)) || px.iter().any(|&p| p < T::zero()) {
            return Err(Error::Normalization {
                pixel: i,
                sum: sum.as_f64(),
            });
        }
    }
    Ok(())
}

/// Pixel-averaged `-log Y[label]` with posteriors in the channels of
/// `posteriors` (one channel per class).
pub fn cross_entropy<T: Real>(posteriors: &ImageBuffer<T>, labels: &LabelMap) -> Result<T> {
    if posteriors.width() != labels.width() || posteriors.height() != labels.height() {
        return Err(Error::size("posteriors and labels differ in size"));
    }
    check_normalized(posteriors)?;
    let ch = posteriors.channels();
    let clamp = T::lit(LOG_CLAMP);
    let mut sum = T::zero();
    for (px, &l) in posteriors.data().chunks(ch).zip(labels.data()) {
        let l = l as usize;
        if l >= ch {
            return Err(Error::OutOfRange {
                what: format!("label index with {ch} classes"),
                value: l as f64,
            });
        }
        sum = sum - px[l].max(clamp).ln();
    }
    Ok(sum / T::from_usize_lossy(labels.data().len().max(1)))
}

/// Cross-entropy against a dense target distribution `-sum_s Ybar_s log Y_s`.
pub fn cross_entropy_one_hot<T: Real>(posteriors: &ImageBuffer<T>, targets: &ImageBuffer<T>) -> Result<T> {
    if !posteriors.same_shape(targets) {
        return Err(Error::size("posteriors and targets differ in shape"));
    }
    check_normalized(posteriors)?;
    check_normalized(targets)?;
    let clamp = T::lit(LOG_CLAMP);
    let sum = posteriors
        .data()
        .iter()
        .zip(targets.data())
        .fold(T::zero(), |acc, (&y, &t)| acc - t * y.max(clamp).ln());
    let n = posteriors.width() * posteriors.height();
    Ok(sum / T::from_usize_lossy(n.max(1)))
}

/// `1` where neither label map shows a dynamic class, `0` otherwise.
pub fn dynamic_mask(target: &LabelMap, warped: &LabelMap, dynamic: &BTreeSet<u8>) -> Result<Mask> {
    if !target.same_size(warped) {
        return Err(Error::size("label maps differ in size"));
    }
    let data = target
        .data()
        .iter()
        .zip(warped.data())
        .map(|(a, b)| (!dynamic.contains(a) && !dynamic.contains(b)) as u8)
        .collect();
    Plane::new(target.width(), target.height(), data)
}

/// Intersection-over-union of the dynamic regions of two label maps, or
/// `None` when neither contains a dynamic pixel.
pub fn dynamic_iou(target: &LabelMap, warped: &LabelMap, dynamic: &BTreeSet<u8>) -> Result<Option<f64>> {
    if !target.same_size(warped) {
        return Err(Error::size("label maps differ in size"));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (a, b) in target.data().iter().zip(warped.data()) {
        let (da, db) = (dynamic.contains(a), dynamic.contains(b));
        inter += (da && db) as usize;
        union += (da || db) as usize;
    }
    Ok((union > 0).then(|| inter as f64 / union as f64))
}

/// A frame is mostly moving when its dynamic regions disagree after
/// warping (IoU below the threshold). Frames without dynamic pixels are
/// static.
pub fn motion_flag(target: &LabelMap, warped: &LabelMap, dynamic: &BTreeSet<u8>) -> Result<bool> {
    Ok(dynamic_iou(target, warped, dynamic)?.is_some_and(|iou| iou < MOTION_IOU_THRESHOLD))
}

/// Decide per frame whether the dynamic mask is applied.
///
/// Only flagged frames are eligible. Among them, masking is spread evenly:
/// the `k`-th flagged frame is masked iff `floor((k+1) eps) > floor(k eps)`,
/// so a fraction `eps` of them (rounded down) is masked and the choice is
/// deterministic.
pub fn apply_fraction(motion_flags: &[bool], epsilon_frac: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&epsilon_frac) {
        return Err(Error::OutOfRange {
            what: "epsilon fraction must lie in [0, 1]".into(),
            value: epsilon_frac,
        });
    }
    let mut k = 0usize;
    Ok(motion_flags
        .iter()
        .map(|&flag| {
            if !flag {
                return false;
            }
            let apply = ((k + 1) as f64 * epsilon_frac).floor() > (k as f64 * epsilon_frac).floor();
            k += 1;
            apply
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(w: usize, data: &[u8]) -> LabelMap {
        Plane::new(w, data.len() / w, data.to_vec()).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        let y: ImageBuffer<f64> = ImageBuffer::new(1, 1, 2, vec![0.8, 0.2]).unwrap();
        let ce = cross_entropy(&y, &labels(1, &[0])).unwrap();
        assert!((ce - (-(0.8f64).ln())).abs() < 1e-15);
        let u: ImageBuffer<f64> = ImageBuffer::new(2, 1, 4, vec![0.25; 8]).unwrap();
        assert!((cross_entropy(&u, &labels(2, &[3, 1])).unwrap() - 4f64.ln()).abs() < 1e-15);
        let one: ImageBuffer<f64> = ImageBuffer::new(1, 1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        assert!(cross_entropy(&one, &labels(1, &[1])).unwrap().abs() < 1e-12);
        assert!(cross_entropy_one_hot(&one, &one).unwrap().abs() < 1e-12);
    }

    #[test]
    fn unnormalized_posteriors_rejected() {
        let y = ImageBuffer::new(1, 1, 2, vec![0.8, 0.3]).unwrap();
        assert!(matches!(cross_entropy(&y, &labels(1, &[0])), Err(Error::Normalization { .. })));
    }

    #[test]
    fn mask_examples() {
        let dynamic: BTreeSet<u8> = [5u8].into();
        let t = labels(3, &[0, 5, 1]);
        let w = labels(3, &[0, 1, 5]);
        assert_eq!(dynamic_mask(&t, &w, &dynamic).unwrap().data(), &[1, 0, 0]);
        let none = dynamic_mask(&t, &w, &BTreeSet::new()).unwrap();
        assert!(none.data().iter().all(|&m| m == 1));
        assert!(motion_flag(&t, &w, &dynamic).unwrap());
        assert!(!motion_flag(&t, &t, &dynamic).unwrap());
        assert!(!motion_flag(&labels(1, &[0]), &labels(1, &[1]), &dynamic).unwrap());
    }

    #[test]
    fn fraction_spreads_evenly() {
        let flags = vec![true; 10];
        assert_eq!(apply_fraction(&flags, 0.0).unwrap(), vec![false; 10]);
        assert_eq!(apply_fraction(&flags, 1.0).unwrap(), vec![true; 10]);
        let half = apply_fraction(&flags, 0.5).unwrap();
        assert_eq!(half.iter().filter(|&&a| a).count(), 5);
        let mixed = apply_fraction(&[false, true, false, true], 1.0).unwrap();
        assert_eq!(mixed, vec![false, true, false, true]);
        assert!(apply_fraction(&flags, 1.5).is_err());
    }
}
