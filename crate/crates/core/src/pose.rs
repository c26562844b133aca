//! Rigid transforms as unit quaternion plus translation.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation of `angle` radians about a (not necessarily unit) axis.
    pub fn from_axis_angle(axis: [T; 3], angle: T) -> Result<Self> {
        let n = norm3(axis);
        if !(n > T::zero()) {
            return Err(Error::Degenerate("rotation axis has zero length".into()));
        }
        let (s, c) = (angle / T::lit(2.0)).sin_cos();
        Ok(Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n))
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        let (a, b) = (self, rhs);
        Self::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// `q v q*` for a unit quaternion, expanded to avoid the full products.
    pub fn rotate(&self, v: [T; 3]) -> [T; 3] {
        let two = T::lit(2.0);
        let u = [self.x, self.y, self.z];
        let t = scale3(cross3(u, v), two);
        let ut = cross3(u, t);
        [
            v[0] + self.w * t[0] + ut[0],
            v[1] + self.w * t[1] + ut[1],
            v[2] + self.w * t[2] + ut[2],
        ]
    }
}

/// Rigid transform `p -> R(q) p + t`.
///
/// In view synthesis the pose maps target-frame points into the source frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T> {
    q: Quaternion<T>,
    t: [T; 3],
}

impl<T: Real> Pose<T> {
    /// Normalizes `q`; rejects zero or non-finite quaternions and translations.
    pub fn new(q: Quaternion<T>, t: [T; 3]) -> Result<Self> {
        let n = q.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::Degenerate(format!("quaternion norm {n} cannot be normalized")));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("translation must be finite".into()));
        }
        let q = Quaternion::new(q.w / n, q.x / n, q.y / n, q.z / n);
        Ok(Self { q, t })
    }

    pub fn identity() -> Self {
        Self {
            q: Quaternion::identity(),
            t: [T::zero(); 3],
        }
    }

    pub fn from_translation(t: [T; 3]) -> Self {
        Self {
            q: Quaternion::identity(),
            t,
        }
    }

    pub fn rotation(&self) -> &Quaternion<T> {
        &self.q
    }

    pub fn translation(&self) -> [T; 3] {
        self.t
    }

    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        let r = self.q.rotate(p);
        [r[0] + self.t[0], r[1] + self.t[1], r[2] + self.t[2]]
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &Self) -> Self {
        let q = self.q.mul(&first.q);
        let t = self.apply(first.t);
        Self { q, t }
    }

    pub fn inverse(&self) -> Self {
        let qi = self.q.conjugate();
        let r = qi.rotate(self.t);
        Self {
            q: qi,
            t: [-r[0], -r[1], -r[2]],
        }
    }
}

pub(crate) fn norm3<T: Real>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross3<T: Real>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn scale3<T: Real>(a: [T; 3], k: T) -> [T; 3] {
    [a[0] * k, a[1] * k, a[2] * k]
}
