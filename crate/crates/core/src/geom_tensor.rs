//! Six-channel camera geometry tensor: centered coordinates, incidence-angle
//! maps and normalized coordinates.
//!
//! The tensor encodes a camera's intrinsics per pixel so a single network
//! can be fed images from differently calibrated cameras. Channel order is
//! fixed: `cc_x, cc_y, a_x, a_y, nc_x, nc_y`.

use crate::buffer::{resize_bilinear, Plane};
use crate::camera::{Intrinsics, ModelKind, RootLut, DEFAULT_LUT_STEP};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CHANNEL_NAMES: [&str; 6] = ["cc_x", "cc_y", "a_x", "a_y", "nc_x", "nc_y"];

#[derive(Debug, Clone, PartialEq)]
pub struct CameraGeometryTensor<T> {
    pub cc_x: Plane<T>,
    pub cc_y: Plane<T>,
    pub a_x: Plane<T>,
    pub a_y: Plane<T>,
    pub nc_x: Plane<T>,
    pub nc_y: Plane<T>,
}

impl<T: Real> CameraGeometryTensor<T> {
    pub fn width(&self) -> usize {
        self.cc_x.width()
    }

    pub fn height(&self) -> usize {
        self.cc_x.height()
    }

    /// Channels in their canonical order.
    pub fn channels(&self) -> [&Plane<T>; 6] {
        [&self.cc_x, &self.cc_y, &self.a_x, &self.a_y, &self.nc_x, &self.nc_y]
    }

    pub fn from_channels(channels: [Plane<T>; 6]) -> Result<Self> {
        let [cc_x, cc_y, a_x, a_y, nc_x, nc_y] = channels;
        for c in [&cc_y, &a_x, &a_y, &nc_x, &nc_y] {
            if !c.same_size(&cc_x) {
                return Err(Error::size("geometry tensor channels differ in size"));
            }
        }
        Ok(Self {
            cc_x,
            cc_y,
            a_x,
            a_y,
            nc_x,
            nc_y,
        })
    }
}

/// Native `(w+1) x (h+1)` centered-coordinate grids.
pub fn native_centered_coords<T: Real>(model: &Intrinsics<T>) -> (Plane<T>, Plane<T>) {
    let (nw, nh) = (model.width() + 1, model.height() + 1);
    let cc_x = Plane::from_fn(nw, nh, |i, _| T::from_usize_lossy(i) - model.cx());
    let cc_y = Plane::from_fn(nw, nh, |_, j| T::from_usize_lossy(j) - model.cy());
    (cc_x, cc_y)
}

/// Centered coordinates built on the native grid and resized bilinearly
/// (corner-aligned) to `out_w x out_h`.
pub fn centered_coords<T: Real>(model: &Intrinsics<T>, out_w: usize, out_h: usize) -> Result<(Plane<T>, Plane<T>)> {
    if out_w < 1 || out_h < 1 {
        return Err(Error::InvalidParameter(format!("output size {out_w}x{out_h} must be at least 1x1")));
    }
    let (cc_x, cc_y) = native_centered_coords(model);
    Ok((resize_bilinear(&cc_x, out_w, out_h)?, resize_bilinear(&cc_y, out_w, out_h)?))
}

/// Signed incidence-angle maps. Each channel inverts the radial function
/// along one image axis (`y_I = 0` for `a_x`, `x_I = 0` for `a_y`) and
/// carries the sign of the centered coordinate. Polynomial models resolve
/// roots through a lookup table.
pub fn incidence_maps<T: Real>(model: &Intrinsics<T>, cc_x: &Plane<T>, cc_y: &Plane<T>) -> Result<(Plane<T>, Plane<T>)> {
    if !cc_x.same_size(cc_y) {
        return Err(Error::size("cc_x and cc_y differ in size"));
    }
    let lut = match model.kind() {
        ModelKind::Polynomial => Some(RootLut::build(model, T::lit(DEFAULT_LUT_STEP))?),
        _ => None,
    };
    let angle = |cc: T| -> Result<T> {
        let rho = cc.abs();
        let theta = match &lut {
            Some(lut) => lut.lookup(rho)?,
            None => model.radial_inverse(rho)?,
        };
        Ok(if cc < T::zero() { -theta } else { theta })
    };
    let map = |src: &Plane<T>| -> Result<Plane<T>> {
        let data = src.data().iter().map(|&c| angle(c)).collect::<Result<Vec<_>>>()?;
        Plane::new(src.width(), src.height(), data)
    };
    Ok((map(cc_x)?, map(cc_y)?))
}

/// Coordinates spanning `-1` (left/top border) to `1` (right/bottom border).
pub fn normalized_coords<T: Real>(out_w: usize, out_h: usize) -> Result<(Plane<T>, Plane<T>)> {
    if out_w < 2 || out_h < 2 {
        return Err(Error::InvalidParameter(format!("output size {out_w}x{out_h} must be at least 2x2")));
    }
    let span = |i: usize, n: usize| {
        let last = T::from_usize_lossy(n - 1);
        (T::lit(2.0) * T::from_usize_lossy(i) - last) / last
    };
    Ok((
        Plane::from_fn(out_w, out_h, |i, _| span(i, out_w)),
        Plane::from_fn(out_w, out_h, |_, j| span(j, out_h)),
    ))
}

pub fn assemble_tensor<T: Real>(model: &Intrinsics<T>, out_w: usize, out_h: usize) -> Result<CameraGeometryTensor<T>> {
    let (nc_x, nc_y) = normalized_coords(out_w, out_h)?;
    let (cc_x, cc_y) = centered_coords(model, out_w, out_h)?;
    let (a_x, a_y) = incidence_maps(model, &cc_x, &cc_y)?;
    CameraGeometryTensor::from_channels([cc_x, cc_y, a_x, a_y, nc_x, nc_y])
}
