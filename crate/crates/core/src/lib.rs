//! Geometry, view synthesis, losses and post-processing for self-supervised
//! surround-view fisheye distance estimation.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod buffer;
pub mod camera;
pub mod error;
pub mod geom_tensor;
pub mod heightmap;
pub mod io;
pub mod losses;
pub mod nn_kernels;
pub mod pose;
pub mod scalar;
pub mod selfcheck;
pub mod synthetic;
pub mod warp;

pub use buffer::{DistanceMap, ImageBuffer, LabelMap, Mask, Plane};
pub use camera::{Intrinsics, ModelKind, Projection, RadialModel, RootLut};
pub use error::{Error, Result};
pub use geom_tensor::{assemble_tensor, CameraGeometryTensor};
pub use heightmap::{FusionState, HeightGrid};
pub use losses::{LossMap, LossReport, LossWeights, RobustParams, UncertaintyParams};
pub use nn_kernels::{AttentionParams, FeatureMap, PacFilter};
pub use pose::{Pose, Quaternion};
pub use scalar::Real;

pub type Intrinsics64 = Intrinsics<f64>;
pub type Intrinsics32 = Intrinsics<f32>;
pub type Pose64 = Pose<f64>;
pub type Pose32 = Pose<f32>;
pub type Image64 = ImageBuffer<f64>;
pub type Image32 = ImageBuffer<f32>;
pub type Distance64 = DistanceMap<f64>;
pub type Distance32 = DistanceMap<f32>;
pub type Tensor64 = CameraGeometryTensor<f64>;
pub type Tensor32 = CameraGeometryTensor<f32>;
pub type Grid64 = HeightGrid<f64>;
pub type RobustParams64 = RobustParams<f64>;
