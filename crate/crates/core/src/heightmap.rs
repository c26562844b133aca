//! Top-view height grid fused from per-camera distance maps, with spatial
//! and temporal smoothing.

use crate::buffer::DistanceMap;
use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::pose::Pose;
use crate::scalar::Real;
use crate::warp::lift;

pub const DEFAULT_CELL_SIZE: f64 = 0.05;
pub const DEFAULT_RANGE: f64 = 10.0;
pub const DEFAULT_TEMPORAL_LAMBDA: f64 = 0.5;

/// Square grid over `[-range, range]^2` in the vehicle frame (`x`, `y`
/// horizontal, `z` up). Cell `(ix, iy)` is stored at `iy * side + ix`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid<T> {
    cell_size: T,
    range: T,
    side: usize,
    height: Vec<T>,
    count: Vec<u32>,
}

impl<T: Real> HeightGrid<T> {
    pub fn new(cell_size: T, range: T) -> Result<Self> {
        if !(cell_size > T::zero()) || !(range > T::zero()) || !cell_size.is_finite() || !range.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive cell size and range, got {cell_size} and {range}"
            )));
        }
        let side = (T::lit(2.0) * range / cell_size)
            .round()
            .to_usize()
            .filter(|&s| s > 0)
            .ok_or_else(|| Error::InvalidParameter("grid has no cells".into()))?;
        Ok(Self {
            cell_size,
            range,
            side,
            height: vec![T::zero(); side * side],
            count: vec![0; side * side],
        })
    }

    /// Rebuilds a grid from stored planes; unknown cells must have count 0.
    pub fn from_parts(cell_size: T, range: T, height: Vec<T>, count: Vec<u32>) -> Result<Self> {
        let mut g = Self::new(cell_size, range)?;
        if height.len() != g.height.len() || count.len() != g.count.len() {
            return Err(Error::size(format!("grid of side {} got {} heights", g.side, height.len())));
        }
        g.height = height
            .into_iter()
            .zip(&count)
            .map(|(h, &n)| if n > 0 { h } else { T::zero() })
            .collect();
        g.count = count;
        Ok(g)
    }

    pub fn cell_size(&self) -> T {
        self.cell_size
    }

    pub fn range(&self) -> T {
        self.range
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Height of a known cell.
    pub fn height(&self, ix: usize, iy: usize) -> Option<T> {
        let i = iy * self.side + ix;
        (self.count[i] > 0).then(|| self.height[i])
    }

    pub fn count(&self, ix: usize, iy: usize) -> u32 {
        self.count[iy * self.side + ix]
    }

    pub fn is_known(&self, ix: usize, iy: usize) -> bool {
        self.count(ix, iy) > 0
    }

    pub fn heights(&self) -> &[T] {
        &self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.count
    }

    pub fn known_count(&self) -> usize {
        self.count.iter().filter(|&&n| n > 0).count()
    }

    /// Cell containing `(x, y)`, or `None` outside the range.
    pub fn cell_of(&self, x: T, y: T) -> Option<(usize, usize)> {
        let idx = |v: T| -> Option<usize> {
            let f = ((v + self.range) / self.cell_size).floor();
            (f >= T::zero()).then(|| f.to_usize()).flatten().filter(|&i| i < self.side)
        };
        Some((idx(x)?, idx(y)?))
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.side == other.side && self.cell_size == other.cell_size && self.range == other.range
    }

    fn empty_like(&self) -> Self {
        Self {
            height: vec![T::zero(); self.height.len()],
            count: vec![0; self.count.len()],
            ..*self
        }
    }
}

impl<T: Real> Default for HeightGrid<T> {
    fn default() -> Self {
        Self::new(T::lit(DEFAULT_CELL_SIZE), T::lit(DEFAULT_RANGE)).expect("default grid geometry")
    }
}

/// Adds points to the grid. Each cell keeps the maximum `z` of its hits;
/// points outside the range are skipped.
pub fn project_to_grid<T: Real>(points: &[[T; 3]], grid: &HeightGrid<T>) -> HeightGrid<T> {
    let mut out = grid.clone();
    for &[x, y, z] in points {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            continue;
        }
        let Some((ix, iy)) = out.cell_of(x, y) else { continue };
        let i = iy * out.side + ix;
        out.height[i] = if out.count[i] == 0 { z } else { out.height[i].max(z) };
        out.count[i] += 1;
    }
    out
}

/// Vehicle-frame points from a distance map and the camera's mounting pose
/// (camera to vehicle).
pub fn points_from_distance<T: Real>(dist: &DistanceMap<T>, model: &Intrinsics<T>, extrinsics: &Pose<T>) -> Result<Vec<[T; 3]>> {
    let cloud = lift(dist, model)?;
    Ok(cloud
        .points()
        .iter()
        .zip(cloud.validity())
        .filter(|(_, &ok)| ok)
        .map(|(&p, _)| extrinsics.apply(p))
        .collect())
}

/// Count-weighted mean of overlapping cells; cells seen by one camera pass
/// through.
pub fn fuse_cameras<T: Real>(grids: &[HeightGrid<T>]) -> Result<HeightGrid<T>> {
    let first = grids.first().ok_or(Error::EmptySource)?;
    if grids.iter().any(|g| !g.same_geometry(first)) {
        return Err(Error::size("height grids differ in geometry"));
    }
    let mut out = first.empty_like();
    for i in 0..out.height.len() {
        let (mut sum, mut n) = (T::zero(), 0u32);
        for g in grids.iter().filter(|g| g.count[i] > 0) {
            sum = sum + g.height[i] * T::lit(g.count[i] as f64);
            n += g.count[i];
        }
        if n > 0 {
            out.height[i] = sum / T::lit(n as f64);
            out.count[i] = n;
        }
    }
    Ok(out)
}

/// 3x3 median over known cells; unknown cells stay unknown. With an even
/// number of known neighbors the two middle values are averaged.
pub fn spatial_smooth<T: Real>(grid: &HeightGrid<T>) -> HeightGrid<T> {
    let s = grid.side;
    let mut out = grid.clone();
    let mut window = Vec::with_capacity(9);
    for iy in 0..s {
        for ix in 0..s {
            if !grid.is_known(ix, iy) {
                continue;
            }
            window.clear();
            for y in iy.saturating_sub(1)..=(iy + 1).min(s - 1) {
                for x in ix.saturating_sub(1)..=(ix + 1).min(s - 1) {
                    if let Some(h) = grid.height(x, y) {
                        window.push(h);
                    }
                }
            }
            window.sort_by(|a, b| a.partial_cmp(b).expect("finite heights"));
            let m = window.len();
            let med = if m % 2 == 1 {
                window[m / 2]
            } else {
                (window[m / 2 - 1] + window[m / 2]) * T::lit(0.5)
            };
            out.height[iy * s + ix] = med;
        }
    }
    out
}

/// Previous smoothed grid and the blend factor of the temporal filter.
#[derive(Debug, Clone)]
pub struct FusionState<T> {
    lambda: T,
    previous: Option<HeightGrid<T>>,
}

impl<T: Real> FusionState<T> {
    pub fn new(lambda: T) -> Result<Self> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(Error::OutOfRange {
                what: "temporal blend factor must lie in (0, 1]".into(),
                value: lambda.as_f64(),
            });
        }
        Ok(Self { lambda, previous: None })
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn previous(&self) -> Option<&HeightGrid<T>> {
        self.previous.as_ref()
    }
}

impl<T: Real> Default for FusionState<T> {
    fn default() -> Self {
        Self::new(T::lit(DEFAULT_TEMPORAL_LAMBDA)).expect("default blend factor")
    }
}

/// `h = lambda h_now + (1 - lambda) h_prev` on cells known in both frames;
/// other cells take the current observation. The result becomes the new
/// state.
pub fn temporal_smooth<T: Real>(grid: &HeightGrid<T>, state: &mut FusionState<T>) -> Result<HeightGrid<T>> {
    let mut out = grid.clone();
    if let Some(prev) = &state.previous {
        if !prev.same_geometry(grid) {
            return Err(Error::size("height grid geometry changed between frames"));
        }
        let l = state.lambda;
        for i in 0..out.height.len() {
            if grid.count[i] > 0 && prev.count[i] > 0 {
                out.height[i] = l * grid.height[i] + (T::one() - l) * prev.height[i];
            }
        }
    }
    state.previous = Some(out.clone());
    Ok(out)
}
