//! Dense raster containers: scalar planes, multi-channel images, label maps,
//! binary masks and distance maps.
//!
//! Everything is row-major with `(0, 0)` at the top-left pixel center.
//! Multi-channel images are stored interleaved (`HWC`).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Single-channel raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::size(format!(
                "plane {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Plane<U> {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn same_size<U>(&self, other: &Plane<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Multi-channel image with intensities nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer<T> {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> ImageBuffer<T> {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidParameter("image needs at least one channel".into()));
        }
        if data.len() != width * height * channels {
            return Err(Error::size(format!(
                "image {}x{}x{} needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![T::zero(); width * height * channels],
        }
    }

    /// Single-channel image from a closure over pixel coordinates.
    pub fn gray_from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> T) -> Self {
        let plane = Plane::from_fn(width, height, f);
        Self::from_plane(&plane)
    }

    pub fn from_plane(plane: &Plane<T>) -> Self {
        Self {
            width: plane.width(),
            height: plane.height(),
            channels: 1,
            data: plane.data().to_vec(),
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[T] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> Plane<T> {
        Plane::from_fn(self.width, self.height, |x, y| self.get(x, y, c))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Per-pixel class indices.
pub type LabelMap = Plane<u8>;

/// Binary mask stored as `0`/`1` bytes.
pub type Mask = Plane<u8>;

/// Per-pixel Euclidean distance in meters plus a validity flag per pixel.
///
/// Valid entries are strictly positive and finite. Invalid entries (e.g. a
/// zero in a 16-bit distance file) keep an arbitrary placeholder value and are
/// skipped by every consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap<T> {
    values: Plane<T>,
    valid: Vec<bool>,
}

impl<T: Real> DistanceMap<T> {
    /// Fully valid map; every value must be `> 0` and finite.
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        let valid = vec![true; values.len()];
        Self::with_validity(width, height, values, valid)
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let plane = Plane::from_fn(width, height, f);
        Self::new(width, height, plane.into_data())
    }

    pub fn with_validity(width: usize, height: usize, values: Vec<T>, valid: Vec<bool>) -> Result<Self> {
        let values = Plane::new(width, height, values)?;
        if valid.len() != width * height {
            return Err(Error::size("validity flags do not match distance map size"));
        }
        for (i, (&v, &ok)) in values.data().iter().zip(&valid).enumerate() {
            if ok && !(v > T::zero() && v.is_finite()) {
                return Err(Error::OutOfRange {
                    what: format!("distance at index {i} must be positive and finite"),
                    value: v.as_f64(),
                });
            }
        }
        Ok(Self { values, valid })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.values.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.values.height()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values.get(x, y)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width() + x]
    }

    pub fn values(&self) -> &Plane<T> {
        &self.values
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    /// Multiplies every distance by `k > 0`.
    pub fn scaled(&self, k: T) -> Result<Self> {
        Self::with_validity(
            self.width(),
            self.height(),
            self.values.data().iter().map(|&v| v * k).collect(),
            self.valid.clone(),
        )
    }
}

/// Corner-aligned bilinear resize of a plane.
///
/// Output sample `i` maps to source coordinate `i * (src_w - 1) / (out_w - 1)`,
/// so both border samples land exactly on the source borders. A single output
/// sample maps to the source center.
pub fn resize_bilinear<T: Real>(src: &Plane<T>, out_w: usize, out_h: usize) -> Result<Plane<T>> {
    if out_w == 0 || out_h == 0 || src.width() == 0 || src.height() == 0 {
        return Err(Error::InvalidParameter("resize requires non-empty sizes".into()));
    }
    let xs = axis_samples::<T>(src.width(), out_w);
    let ys = axis_samples::<T>(src.height(), out_h);
    Ok(Plane::from_fn(out_w, out_h, |i, j| {
        let (x0, x1, fx) = xs[i];
        let (y0, y1, fy) = ys[j];
        let top = src.get(x0, y0) * (T::one() - fx) + src.get(x1, y0) * fx;
        let bottom = src.get(x0, y1) * (T::one() - fx) + src.get(x1, y1) * fx;
        top * (T::one() - fy) + bottom * fy
    }))
}

fn axis_samples<T: Real>(src_n: usize, out_n: usize) -> Vec<(usize, usize, T)> {
    (0..out_n)
        .map(|i| {
            if src_n == 1 {
                return (0, 0, T::zero());
            }
            if out_n == 1 {
                let pos = T::from_usize_lossy(src_n - 1) / T::lit(2.0);
                return split(pos, src_n);
            }
            let pos = T::from_usize_lossy(i * (src_n - 1)) / T::from_usize_lossy(out_n - 1);
            split(pos, src_n)
        })
        .collect()
}

fn split<T: Real>(pos: T, n: usize) -> (usize, usize, T) {
    let x0 = pos.floor().to_usize().unwrap_or(0).min(n - 1);
    let x1 = (x0 + 1).min(n - 1);
    (x0, x1, pos - T::from_usize_lossy(x0))
}
