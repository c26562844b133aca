//! Analytic scenes with known geometry: a textured fronto-parallel plane
//! seen from two poses and a flat ground plane seen by a camera rig.

use crate::buffer::{DistanceMap, ImageBuffer};
use crate::camera::Intrinsics;
use crate::error::Result;
use crate::pose::{Pose, Quaternion};
use crate::scalar::Real;

/// Smooth texture on the plane, in `[0.1, 0.9]`.
pub fn plane_texture(x: f64, y: f64) -> f64 {
    0.5 + 0.2 * (3.1 * x).sin() * (2.3 * y).cos() + 0.15 * (5.3 * x + 4.1 * y).sin() + 0.05 * (11.0 * y - 2.0 * x).cos()
}

pub struct PlaneScene {
    pub target: Intrinsics<f64>,
    pub source: Intrinsics<f64>,
    /// Maps target-camera coordinates into the source camera.
    pub pose: Pose<f64>,
    pub plane_z: f64,
    pub distance: DistanceMap<f64>,
    pub target_image: ImageBuffer<f64>,
    pub source_image: ImageBuffer<f64>,
}

/// Renders the plane `Z = plane_z` (target frame) into a camera placed by
/// `to_cam`, which maps target-frame points into that camera.
fn render_plane(model: &Intrinsics<f64>, to_cam: &Pose<f64>, plane_z: f64) -> Result<ImageBuffer<f64>> {
    let back = to_cam.inverse();
    let origin = back.apply([0.0; 3]);
    let mut data = Vec::with_capacity(model.width() * model.height());
    for v in 0..model.height() {
        for u in 0..model.width() {
            let r = model.unproject(u as f64, v as f64)?;
            let d = back.rotation().rotate(r);
            let s = (plane_z - origin[2]) / d[2];
            let value = if d[2] > 0.0 && s > 0.0 {
                plane_texture(origin[0] + s * d[0], origin[1] + s * d[1])
            } else {
                0.0
            };
            data.push(value);
        }
    }
    ImageBuffer::new(model.width(), model.height(), 1, data)
}

/// Rectilinear camera pair looking at a plane 4 m away; the source camera
/// is shifted sideways and slightly rotated.
pub fn plane_scene(width: usize, height: usize) -> Result<PlaneScene> {
    let f = width as f64 * 1.1;
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let target = Intrinsics::rectilinear(f, cx, cy, width, height)?;
    let source = target.clone();
    let plane_z = 4.0;
    let pose = Pose::new(Quaternion::from_axis_angle([0.2, 1.0, 0.1], 0.03)?, [-0.25, 0.05, 0.1])?;
    let distance = DistanceMap::from_fn(width, height, |u, v| {
        let r = target.unproject(u as f64, v as f64).expect("rectilinear pixel");
        plane_z / r[2]
    })?;
    Ok(PlaneScene {
        target_image: render_plane(&target, &Pose::identity(), plane_z)?,
        source_image: render_plane(&source, &pose, plane_z)?,
        target,
        source,
        pose,
        plane_z,
        distance,
    })
}

/// Camera-to-vehicle rotation for a camera looking along vehicle `+x`
/// (vehicle `z` up), then yawed about `z` and pitched down.
pub fn mount_rotation<T: Real>(yaw: T, pitch_down: T) -> Result<Quaternion<T>> {
    let h = T::lit(0.5);
    // camera x -> -y, y -> -z, z -> +x
    let base = Quaternion::new(h, -h, h, -h);
    let pitch = Quaternion::from_axis_angle([T::zero(), T::one(), T::zero()], pitch_down)?;
    let yaw = Quaternion::from_axis_angle([T::zero(), T::zero(), T::one()], yaw)?;
    Ok(yaw.mul(&pitch.mul(&base)))
}

pub struct GroundView {
    pub name: String,
    pub model: Intrinsics<f64>,
    /// Camera to vehicle.
    pub extrinsics: Pose<f64>,
    pub distance: DistanceMap<f64>,
}

/// Analytic distance to the ground plane `z = 0` for a camera mounted at
/// `extrinsics`. Rays that miss the ground or travel further than
/// `max_distance` are invalid.
pub fn ground_distance(model: &Intrinsics<f64>, extrinsics: &Pose<f64>, max_distance: f64) -> Result<DistanceMap<f64>> {
    let h = extrinsics.translation()[2];
    let (w, ht) = (model.width(), model.height());
    let mut values = Vec::with_capacity(w * ht);
    let mut valid = Vec::with_capacity(w * ht);
    for v in 0..ht {
        for u in 0..w {
            let r = model.unproject(u as f64, v as f64)?;
            let d = extrinsics.rotation().rotate(r);
            let s = if d[2] < 0.0 { h / -d[2] } else { f64::INFINITY };
            let ok = s.is_finite() && s <= max_distance;
            values.push(if ok { s } else { 1.0 });
            valid.push(ok);
        }
    }
    DistanceMap::with_validity(w, ht, values, valid)
}

/// Four rectilinear cameras at 1.2 m height, facing front, left, rear and
/// right, pitched 35 degrees down.
pub fn flat_ground_rig(width: usize, height: usize) -> Result<Vec<GroundView>> {
    let f = width as f64 * 0.6;
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let names = ["front", "left", "rear", "right"];
    let offsets = [[2.0, 0.0], [0.0, 1.0], [-2.0, 0.0], [0.0, -1.0]];
    names
        .iter()
        .zip(offsets)
        .enumerate()
        .map(|(i, (name, [ox, oy]))| {
            let model = Intrinsics::rectilinear(f, cx, cy, width, height)?;
            let q = mount_rotation(i as f64 * std::f64::consts::FRAC_PI_2, 35f64.to_radians())?;
            let extrinsics = Pose::new(q, [ox, oy, 1.2])?;
            let distance = ground_distance(&model, &extrinsics, 40.0)?;
            Ok(GroundView {
                name: name.to_string(),
                model,
                extrinsics,
                distance,
            })
        })
        .collect()
}
