//! SSIM-mixed image reconstruction loss and the per-pixel minimum over
//! source frames.

use crate::buffer::{ImageBuffer, Mask, Plane};
use crate::error::{Error, Result};
use crate::scalar::Real;

use super::robust::{robust_loss, RobustParams};

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Per-pixel loss values with a validity flag; invalid pixels carry `0`
/// and are ignored by reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap<T> {
    pub values: Plane<T>,
    pub valid: Mask,
}

impl<T: Real> LossMap<T> {
    pub fn new(values: Plane<T>, valid: Mask) -> Result<Self> {
        if !values.same_size(&valid) {
            return Err(Error::size("loss map values and mask differ in size"));
        }
        Ok(Self { values, valid })
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    /// Mean over valid pixels in row-major order; `0` when nothing is valid.
    pub fn mean(&self) -> T {
        let (sum, n) = self
            .values
            .data()
            .iter()
            .zip(self.valid.data())
            .filter(|(_, &m)| m != 0)
            .fold((T::zero(), 0usize), |(s, n), (&v, _)| (s + v, n + 1));
        if n == 0 {
            T::zero()
        } else {
            sum / T::from_usize_lossy(n)
        }
    }

    pub fn valid_count(&self) -> usize {
        self.valid.data().iter().filter(|&&m| m != 0).count()
    }

    /// Pixel-wise product with a binary mask (e.g. the dynamic-object mask).
    pub fn multiply_mask(&self, mu: &Mask) -> Result<Self> {
        if !self.values.same_size(mu) {
            return Err(Error::size("mask does not match loss map"));
        }
        let values = Plane::new(
            self.width(),
            self.height(),
            self.values
                .data()
                .iter()
                .zip(mu.data())
                .map(|(&v, &m)| if m != 0 { v } else { T::zero() })
                .collect(),
        )?;
        Ok(Self {
            values,
            valid: self.valid.clone(),
        })
    }
}

fn check_same<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>, mask: Option<&Mask>) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::size(format!(
            "images {}x{}x{} and {}x{}x{} differ",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    if let Some(m) = mask {
        if m.width() != a.width() || m.height() != a.height() {
            return Err(Error::size("mask does not match image size"));
        }
    }
    Ok(())
}

/// Windowed SSIM over a 3x3 uniform window, averaged over channels.
///
/// Intensities are expected in `[0, 1]`. Window statistics use only
/// in-bounds pixels whose mask entry is set; pixels whose own mask entry is
/// cleared report `1` (no dissimilarity).
pub fn ssim<T: Real>(a: &ImageBuffer<T>, b: &ImageBuffer<T>, mask: Option<&Mask>) -> Result<Plane<T>> {
    check_same(a, b, mask)?;
    let (w, h, ch) = (a.width(), a.height(), a.channels());
    let c1 = T::lit(SSIM_C1);
    let c2 = T::lit(SSIM_C2);
    let on = |x: usize, y: usize| mask.is_none_or(|m| m.get(x, y) != 0);
    let two = T::lit(2.0);
    let mut out = Plane::filled(w, h, T::one());
    let mut window: Vec<(usize, usize)> = Vec::with_capacity(9);
    for y in 0..h {
        for x in 0..w {
            if !on(x, y) {
                continue;
            }
            window.clear();
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if on(xx, yy) {
                        window.push((xx, yy));
                    }
                }
            }
            let n = T::from_usize_lossy(window.len());
            let mut acc = T::zero();
            for c in 0..ch {
                let (mut ma, mut mb) = (T::zero(), T::zero());
                for &(xx, yy) in &window {
                    ma = ma + a.get(xx, yy, c);
                    mb = mb + b.get(xx, yy, c);
                }
                ma = ma / n;
                mb = mb / n;
                let (mut va, mut vb, mut cov) = (T::zero(), T::zero(), T::zero());
                for &(xx, yy) in &window {
                    let da = a.get(xx, yy, c) - ma;
                    let db = b.get(xx, yy, c) - mb;
                    va = va + da * da;
                    vb = vb + db * db;
                    cov = cov + da * db;
                }
                va = va / n;
                vb = vb / n;
                cov = cov / n;
                let lum = (two * ma * mb + c1) / (ma * ma + mb * mb + c1);
                let cs = (two * cov + c2) / (va + vb + c2);
                acc = acc + lum * cs;
            }
            out.set(x, y, acc / T::from_usize_lossy(ch));
        }
    }
    Ok(out)
}

/// `tau (1 - SSIM) / 2 + (1 - tau) rho_rob(residual)` per pixel, where the
/// robust term is averaged over channels. Pixels outside the ego-mask are
/// flagged invalid.
pub fn reconstruction_loss<T: Real>(
    target: &ImageBuffer<T>,
    reconstructed: &ImageBuffer<T>,
    mask: &Mask,
    robust: &RobustParams<T>,
    tau: T,
) -> Result<LossMap<T>> {
    check_same(target, reconstructed, Some(mask))?;
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(Error::OutOfRange {
            what: "ssim weight tau must lie in [0, 1]".into(),
            value: tau.as_f64(),
        });
    }
    let s = ssim(target, reconstructed, Some(mask))?;
    let (w, h, ch) = (target.width(), target.height(), target.channels());
    let half = T::lit(0.5);
    let values = Plane::from_fn(w, h, |x, y| {
        if mask.get(x, y) == 0 {
            return T::zero();
        }
        let rob = (0..ch).fold(T::zero(), |acc, c| {
            acc + robust_loss(target.get(x, y, c) - reconstructed.get(x, y, c), robust)
        }) / T::from_usize_lossy(ch);
        tau * (T::one() - s.get(x, y)) * half + (T::one() - tau) * rob
    });
    LossMap::new(values, mask.map(|m| (m != 0) as u8))
}

/// Per-pixel minimum over source reconstructions. A pixel takes the minimum
/// over the maps that are valid there and is valid if any of them is.
pub fn min_reconstruction<T: Real>(maps: &[LossMap<T>]) -> Result<LossMap<T>> {
    let first = maps.first().ok_or(Error::EmptySource)?;
    let (w, h) = (first.width(), first.height());
    if maps.iter().any(|m| m.width() != w || m.height() != h) {
        return Err(Error::size("source loss maps differ in size"));
    }
    let mut values = Plane::filled(w, h, T::zero());
    let mut valid = Plane::filled(w, h, 0u8);
    for y in 0..h {
        for x in 0..w {
            let best = maps
                .iter()
                .filter(|m| m.valid.get(x, y) != 0)
                .map(|m| m.values.get(x, y))
                .fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.min(v))));
            if let Some(v) = best {
                values.set(x, y, v);
                valid.set(x, y, 1);
            }
        }
    }
    LossMap::new(values, valid)
}
