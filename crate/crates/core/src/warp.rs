//! Distance-driven view synthesis.
//!
//! Target pixels are lifted to 3D with the predicted distance map, moved into
//! a source camera by a rigid pose and projected there. The resulting
//! [`SampleGrid`] is the single source of truth for every resampling step
//! (images bilinearly, label maps by nearest neighbor, distance maps for the
//! consistency loss). Out-of-bounds samples are zero-filled and excluded via
//! the ego-mask; nothing is ever clamped to the border.

use rayon::prelude::*;

use crate::buffer::{DistanceMap, ImageBuffer, LabelMap, Mask, Plane};
use crate::camera::{pixel_slack, Intrinsics};
use crate::error::{Error, Result};
pub use crate::pose::{Pose, Quaternion};
use crate::scalar::Real;

/// Per-pixel 3D points in the target camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T> {
    width: usize,
    height: usize,
    points: Vec<[T; 3]>,
    valid: Vec<bool>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(width: usize, height: usize, points: Vec<[T; 3]>, valid: Vec<bool>) -> Result<Self> {
        if points.len() != width * height || valid.len() != width * height {
            return Err(Error::size("point cloud buffers do not match its size"));
        }
        Ok(Self {
            width,
            height,
            points,
            valid,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn point(&self, x: usize, y: usize) -> Option<[T; 3]> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.points[i])
    }

    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    /// Applies a rigid transform to every valid point.
    pub fn transformed(&self, pose: &Pose<T>) -> Self {
        Self {
            width: self.width,
            height: self.height,
            points: self.points.iter().map(|&p| pose.apply(p)).collect(),
            valid: self.valid.clone(),
        }
    }
}

/// Continuous source coordinates for every target pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid<T> {
    width: usize,
    height: usize,
    coords: Vec<(T, T)>,
    valid: Vec<bool>,
}

impl<T: Real> SampleGrid<T> {
    pub fn new(width: usize, height: usize, coords: Vec<(T, T)>, valid: Vec<bool>) -> Result<Self> {
        if coords.len() != width * height || valid.len() != width * height {
            return Err(Error::size("sample grid buffers do not match its size"));
        }
        Ok(Self {
            width,
            height,
            coords,
            valid,
        })
    }

    /// Grid sampling every pixel at its own integer coordinate.
    pub fn identity(width: usize, height: usize) -> Self {
        let coords = (0..height)
            .flat_map(|y| (0..width).map(move |x| (T::from_usize_lossy(x), T::from_usize_lossy(y))))
            .collect();
        Self {
            width,
            height,
            coords,
            valid: vec![true; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Source coordinate of a target pixel, `None` when invalid.
    pub fn get(&self, x: usize, y: usize) -> Option<(T, T)> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.coords[i])
    }

    pub fn coords(&self) -> &[(T, T)] {
        &self.coords
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    fn inside(&self, i: usize, src_w: usize, src_h: usize) -> Option<(T, T)> {
        if !self.valid[i] {
            return None;
        }
        let (u, v) = self.coords[i];
        let max_u = T::from_usize_lossy(src_w.saturating_sub(1));
        let max_v = T::from_usize_lossy(src_h.saturating_sub(1));
        let slack = pixel_slack(max_u.max(max_v));
        let inside = u >= -slack && v >= -slack && u <= max_u + slack && v <= max_v + slack;
        inside.then(|| (u.max(T::zero()).min(max_u), v.max(T::zero()).min(max_v)))
    }
}

/// Scales each pixel's unit ray by its distance. Pixels with invalid
/// distance or no inverse are marked invalid instead of failing the frame.
pub fn lift<T: Real>(dist: &DistanceMap<T>, model: &Intrinsics<T>) -> Result<PointCloud<T>> {
    let (w, h) = (dist.width(), dist.height());
    if w != model.width() || h != model.height() {
        return Err(Error::size(format!(
            "distance map {w}x{h} does not match camera {}x{}",
            model.width(),
            model.height()
        )));
    }
    let rows: Vec<Vec<([T; 3], bool)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    if !dist.is_valid(x, y) {
                        return ([T::zero(); 3], false);
                    }
                    let d = dist.get(x, y);
                    match model.unproject(T::from_usize_lossy(x), T::from_usize_lossy(y)) {
                        Ok(r) => ([r[0] * d, r[1] * d, r[2] * d], true),
                        Err(_) => ([T::zero(); 3], false),
                    }
                })
                .collect()
        })
        .collect();
    let (points, valid) = rows.into_iter().flatten().unzip();
    PointCloud::new(w, h, points, valid)
}

/// Projects `pose(p)` for every point into `model`.
pub fn reproject<T: Real>(points: &PointCloud<T>, pose: &Pose<T>, model: &Intrinsics<T>) -> SampleGrid<T> {
    let (coords, valid) = points
        .points
        .par_iter()
        .zip(points.valid.par_iter())
        .map(|(&p, &ok)| {
            if !ok {
                return ((T::nan(), T::nan()), false);
            }
            match model.project(pose.apply(p)) {
                Ok(pr) => ((pr.u, pr.v), pr.valid),
                Err(_) => ((T::nan(), T::nan()), false),
            }
        })
        .unzip();
    SampleGrid {
        width: points.width,
        height: points.height,
        coords,
        valid,
    }
}

/// `1` where the grid entry is valid and lies inside `[0, w-1] x [0, h-1]`.
pub fn ego_mask<T: Real>(grid: &SampleGrid<T>, src_w: usize, src_h: usize) -> Mask {
    let data = (0..grid.coords.len())
        .map(|i| grid.inside(i, src_w, src_h).is_some() as u8)
        .collect();
    Plane::new(grid.width, grid.height, data).expect("grid-sized mask")
}

/// Bilinear interpolation of the four neighbors; entries outside the ego-mask
/// produce zeros.
pub fn bilinear_sample<T: Real>(src: &ImageBuffer<T>, grid: &SampleGrid<T>) -> ImageBuffer<T> {
    let (sw, sh, ch) = (src.width(), src.height(), src.channels());
    let mut out = ImageBuffer::zeros(grid.width, grid.height, ch);
    out.data_mut()
        .par_chunks_mut(ch)
        .enumerate()
        .for_each(|(i, px)| {
            let Some((u, v)) = grid.inside(i, sw, sh) else {
                return;
            };
            let (x0, fx) = floor_split(u, sw);
            let (y0, fy) = floor_split(v, sh);
            let x1 = (x0 + 1).min(sw - 1);
            let y1 = (y0 + 1).min(sh - 1);
            let one = T::one();
            let w00 = (one - fx) * (one - fy);
            let w10 = fx * (one - fy);
            let w01 = (one - fx) * fy;
            let w11 = fx * fy;
            for (c, out) in px.iter_mut().enumerate() {
                *out = w00 * src.get(x0, y0, c)
                    + w10 * src.get(x1, y0, c)
                    + w01 * src.get(x0, y1, c)
                    + w11 * src.get(x1, y1, c);
            }
        });
    out
}

/// Nearest-neighbor resampling of a label map; samples outside the
/// ego-mask receive `fill`.
pub fn nearest_sample<T: Real>(labels: &LabelMap, grid: &SampleGrid<T>, fill: u8) -> LabelMap {
    let (sw, sh) = (labels.width(), labels.height());
    let data = (0..grid.coords.len())
        .map(|i| match grid.inside(i, sw, sh) {
            Some((u, v)) => {
                let x = u.round().to_usize().unwrap_or(0).min(sw - 1);
                let y = v.round().to_usize().unwrap_or(0).min(sh - 1);
                labels.get(x, y)
            }
            None => fill,
        })
        .collect();
    Plane::new(grid.width, grid.height, data).expect("grid-sized labels")
}

/// Resamples a source distance map on the same grid used for the image.
/// A sample is valid only if all four bilinear neighbors with non-zero
/// weight are valid.
pub fn sample_distance<T: Real>(src: &DistanceMap<T>, grid: &SampleGrid<T>) -> Result<DistanceMap<T>> {
    let (sw, sh) = (src.width(), src.height());
    let mut values = vec![T::one(); grid.coords.len()];
    let mut valid = vec![false; grid.coords.len()];
    for i in 0..grid.coords.len() {
        let Some((u, v)) = grid.inside(i, sw, sh) else {
            continue;
        };
        let (x0, fx) = floor_split(u, sw);
        let (y0, fy) = floor_split(v, sh);
        let x1 = (x0 + 1).min(sw - 1);
        let y1 = (y0 + 1).min(sh - 1);
        let one = T::one();
        let taps = [
            (x0, y0, (one - fx) * (one - fy)),
            (x1, y0, fx * (one - fy)),
            (x0, y1, (one - fx) * fy),
            (x1, y1, fx * fy),
        ];
        if taps.iter().any(|&(x, y, wt)| wt > T::zero() && !src.is_valid(x, y)) {
            continue;
        }
        let acc = taps
            .iter()
            .filter(|t| t.2 > T::zero())
            .fold(T::zero(), |acc, &(x, y, wt)| acc + wt * src.get(x, y));
        values[i] = acc;
        valid[i] = true;
    }
    DistanceMap::with_validity(grid.width, grid.height, values, valid)
}

/// Reconstructs the target view from a source image.
pub struct ViewSynthesis<T> {
    pub image: ImageBuffer<T>,
    pub mask: Mask,
    pub grid: SampleGrid<T>,
}

/// Lift, transform, reproject and sample in one call. `pose` maps target
/// camera coordinates into the source camera.
pub fn synthesize_view<T: Real>(
    dist: &DistanceMap<T>,
    target_model: &Intrinsics<T>,
    pose: &Pose<T>,
    src: &ImageBuffer<T>,
    src_model: &Intrinsics<T>,
) -> Result<ViewSynthesis<T>> {
    let cloud = lift(dist, target_model)?;
    let grid = reproject(&cloud, pose, src_model);
    let image = bilinear_sample(src, &grid);
    let mask = ego_mask(&grid, src.width(), src.height());
    Ok(ViewSynthesis { image, mask, grid })
}

/// Integer part and fraction of a sample coordinate. Coordinates within
/// rounding distance of a pixel center snap onto it, so grids that land on
/// pixels up to float noise reproduce the source exactly.
fn floor_split<T: Real>(u: T, n: usize) -> (usize, T) {
    let r = u.round();
    let u = if (u - r).abs() <= pixel_slack(T::from_usize_lossy(n)) { r } else { u };
    let f = u.floor();
    let i = f.to_usize().unwrap_or(0).min(n - 1);
    (i, u - T::from_usize_lossy(i))
}
