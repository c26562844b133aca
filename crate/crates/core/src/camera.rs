//! Radial distortion camera models.
//!
//! Every model is described by its radial function `rho(theta)`: the pixel
//! distance from the principal point at which a ray with incidence angle
//! `theta` (measured from the `+z` optical axis) lands. Azimuth is preserved,
//! so a full projection is `(cx, cy) + rho(theta) * (X, Y) / |(X, Y)|`.
//!
//! Supported models:
//!
//! | model          | `rho(theta)`                                                        |
//! |----------------|---------------------------------------------------------------------|
//! | polynomial     | `a1 t + a2 t^2 + a3 t^3 + a4 t^4`                                   |
//! | ucm            | `f sin t / (cos t + xi)`                                            |
//! | eucm           | `f sin t / (cos t + alpha (sqrt(beta sin^2 t + cos^2 t) - cos t))`  |
//! | rectilinear    | `f tan t`                                                           |
//! | stereographic  | `2 f tan(t / 2)`                                                    |
//! | double sphere  | `f sin t / (alpha sqrt(sin^2 t + (xi + cos t)^2) + (1 - alpha)(xi + cos t))` |
//!
//! Polynomial coefficients map radians to pixels. All closed-form models are
//! inverted analytically; the polynomial is inverted with a bracketed Newton
//! solver or through a precomputed [`RootLut`].

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Half field of view used for polynomial models when none is declared.
pub const DEFAULT_POLY_HALF_FOV_DEG: f64 = 97.5;

/// Radius step of the default root lookup table, in pixels.
pub const DEFAULT_LUT_STEP: f64 = 0.25;

/// Rounding allowance for image-bound checks: a pixel recovered through
/// unproject/project may land a few ulps outside the border it started on.
pub fn pixel_slack<T: Real>(extent: T) -> T {
    T::epsilon() * T::lit(64.0) * extent.max(T::one())
}

const NEWTON_MAX_ITERS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Polynomial,
    Ucm,
    Eucm,
    Rectilinear,
    Stereographic,
    DoubleSphere,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Polynomial,
        ModelKind::Ucm,
        ModelKind::Eucm,
        ModelKind::Rectilinear,
        ModelKind::Stereographic,
        ModelKind::DoubleSphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Polynomial => "polynomial",
            ModelKind::Ucm => "ucm",
            ModelKind::Eucm => "eucm",
            ModelKind::Rectilinear => "rectilinear",
            ModelKind::Stereographic => "stereographic",
            ModelKind::DoubleSphere => "double_sphere",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Radial function parameters of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialModel<T> {
    /// `a` in pixels per radian^k; `half_fov` bounds the incidence angle.
    Polynomial { a: [T; 4], half_fov: T },
    Ucm { f: T, xi: T },
    Eucm { f: T, alpha: T, beta: T },
    Rectilinear { f: T },
    Stereographic { f: T },
    DoubleSphere { f: T, xi: T, alpha: T },
}

impl<T: Real> RadialModel<T> {
    /// Polynomial model with the default 97.5 degree half field of view.
    pub fn polynomial(a: [T; 4]) -> Self {
        RadialModel::Polynomial {
            a,
            half_fov: T::lit(DEFAULT_POLY_HALF_FOV_DEG.to_radians()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            RadialModel::Polynomial { .. } => ModelKind::Polynomial,
            RadialModel::Ucm { .. } => ModelKind::Ucm,
            RadialModel::Eucm { .. } => ModelKind::Eucm,
            RadialModel::Rectilinear { .. } => ModelKind::Rectilinear,
            RadialModel::Stereographic { .. } => ModelKind::Stereographic,
            RadialModel::DoubleSphere { .. } => ModelKind::DoubleSphere,
        }
    }

    /// Focal length; `None` for the polynomial model.
    pub fn focal(&self) -> Option<T> {
        match *self {
            RadialModel::Polynomial { .. } => None,
            RadialModel::Ucm { f, .. }
            | RadialModel::Eucm { f, .. }
            | RadialModel::Rectilinear { f }
            | RadialModel::Stereographic { f }
            | RadialModel::DoubleSphere { f, .. } => Some(f),
        }
    }

    /// Evaluates `rho(theta)` without any domain check.
    pub fn eval_unchecked(&self, theta: T) -> T {
        let (s, c) = theta.sin_cos();
        match *self {
            RadialModel::Polynomial { a, .. } => poly_eval(&a, theta),
            RadialModel::Ucm { f, xi } => f * s / (c + xi),
            RadialModel::Eucm { f, alpha, beta } => {
                let d = (beta * s * s + c * c).sqrt();
                f * s / (c + alpha * (d - c))
            }
            RadialModel::Rectilinear { f } => f * theta.tan(),
            RadialModel::Stereographic { f } => T::lit(2.0) * f * (theta / T::lit(2.0)).tan(),
            RadialModel::DoubleSphere { f, xi, alpha } => {
                let e = xi + c;
                let d = (s * s + e * e).sqrt();
                f * s / (alpha * d + (T::one() - alpha) * e)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: T| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be finite")))
            }
        };
        let positive = |name: &str, v: T| -> Result<()> {
            finite(name, v)?;
            if v > T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")))
            }
        };
        let unit = |name: &str, v: T| -> Result<()> {
            finite(name, v)?;
            if v >= T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        match *self {
            RadialModel::Polynomial { a, half_fov } => {
                for (i, &ai) in a.iter().enumerate() {
                    finite(&format!("a{}", i + 1), ai)?;
                }
                positive("half_fov", half_fov)?;
                if half_fov > T::PI() {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial half field of view {half_fov} rad exceeds pi"
                    )));
                }
            }
            RadialModel::Ucm { f, xi } => {
                positive("f", f)?;
                finite("xi", xi)?;
                if xi < T::zero() {
                    return Err(Error::InvalidParameter(format!("ucm xi must be >= 0, got {xi}")));
                }
            }
            RadialModel::Eucm { f, alpha, beta } => {
                positive("f", f)?;
                unit("alpha", alpha)?;
                positive("beta", beta)?;
            }
            RadialModel::Rectilinear { f } | RadialModel::Stereographic { f } => positive("f", f)?,
            RadialModel::DoubleSphere { f, xi, alpha } => {
                positive("f", f)?;
                unit("alpha", alpha)?;
                finite("xi", xi)?;
                if xi <= -T::one() || xi > T::one() {
                    return Err(Error::InvalidParameter(format!(
                        "double sphere xi must lie in (-1, 1], got {xi}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest admissible incidence angle and whether it is attained.
    fn domain(&self) -> Result<Domain<T>> {
        let half = T::lit(0.5);
        let one = T::one();
        // Boundary for the alpha-blended models: the projection denominator
        // vanishes (alpha <= 0.5, open boundary) or rho peaks (alpha > 0.5).
        let blend_w = |alpha: T| -> T {
            if alpha <= half {
                alpha / (one - alpha)
            } else {
                (one - alpha) / alpha
            }
        };
        let (theta_max, inclusive) = match *self {
            RadialModel::Polynomial { a, half_fov } => {
                check_poly_monotone(&a, half_fov)?;
                (half_fov, true)
            }
            RadialModel::Rectilinear { .. } => (T::FRAC_PI_2(), false),
            RadialModel::Stereographic { .. } => (T::PI(), false),
            RadialModel::Ucm { xi, .. } => {
                if xi <= one {
                    ((-xi).acos(), false)
                } else {
                    ((-(one / xi)).acos(), true)
                }
            }
            RadialModel::Eucm { alpha, beta, .. } => {
                let w = blend_w(alpha);
                let theta = if w == T::zero() {
                    T::FRAC_PI_2()
                } else {
                    T::PI() - ((one - w * w) / (w * w * beta)).sqrt().atan()
                };
                (theta, alpha > half)
            }
            RadialModel::DoubleSphere { xi, alpha, .. } => {
                // The second-sphere direction phi grows with theta for
                // |xi| <= 1; the limit is cos(phi) = -w, solved for cos(theta).
                let w = blend_w(alpha);
                let k = one - w * w;
                let c = -xi * k - w * (one - xi * xi * k).sqrt();
                (c.max(-one).acos(), alpha > half)
            }
        };
        let rho_max = if inclusive {
            self.eval_unchecked(theta_max)
        } else {
            T::infinity()
        };
        Ok(Domain {
            theta_max,
            inclusive,
            rho_max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Domain<T> {
    theta_max: T,
    inclusive: bool,
    rho_max: T,
}

impl<T: Real> Domain<T> {
    fn contains(&self, theta: T) -> bool {
        theta >= T::zero()
            && if self.inclusive {
                theta <= self.theta_max
            } else {
                theta < self.theta_max
            }
    }
}

/// Result of projecting a 3D point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection<T> {
    pub u: T,
    pub v: T,
    /// `false` when the incidence angle is outside the model domain or the
    /// pixel falls outside `[0, w] x [0, h]`. Coordinates are NaN when the
    /// angle itself is out of domain.
    pub valid: bool,
}

/// Camera intrinsics: sensor geometry plus a radial model.
#[derive(Debug, Clone, PartialEq)]
pub struct Intrinsics<T> {
    model: RadialModel<T>,
    cx: T,
    cy: T,
    width: usize,
    height: usize,
    domain: Domain<T>,
}

impl<T: Real> Intrinsics<T> {
    /// Validates parameters and precomputes the angular domain. Polynomial
    /// models are checked for strict monotonicity here.
    pub fn new(model: RadialModel<T>, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        if width < 1 || height < 1 {
            return Err(Error::InvalidParameter(format!(
                "sensor size must be at least 1x1, got {width}x{height}"
            )));
        }
        let (w, h) = (T::from_usize_lossy(width), T::from_usize_lossy(height));
        if !(cx >= T::zero() && cx <= w) {
            return Err(Error::InvalidParameter(format!("cx = {cx} outside [0, {width}]")));
        }
        if !(cy >= T::zero() && cy <= h) {
            return Err(Error::InvalidParameter(format!("cy = {cy} outside [0, {height}]")));
        }
        model.validate()?;
        let domain = model.domain()?;
        Ok(Self {
            model,
            cx,
            cy,
            width,
            height,
            domain,
        })
    }

    pub fn polynomial(a: [T; 4], cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        Self::new(RadialModel::polynomial(a), cx, cy, width, height)
    }

    pub fn rectilinear(f: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        Self::new(RadialModel::Rectilinear { f }, cx, cy, width, height)
    }

    pub fn stereographic(f: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        Self::new(RadialModel::Stereographic { f }, cx, cy, width, height)
    }

    pub fn ucm(f: T, xi: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        Self::new(RadialModel::Ucm { f, xi }, cx, cy, width, height)
    }

    pub fn eucm(f: T, alpha: T, beta: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        Self::new(RadialModel::Eucm { f, alpha, beta }, cx, cy, width, height)
    }

    pub fn double_sphere(f: T, xi: T, alpha: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        Self::new(RadialModel::DoubleSphere { f, xi, alpha }, cx, cy, width, height)
    }

    pub fn model(&self) -> &RadialModel<T> {
        &self.model
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn cx(&self) -> T {
        self.cx
    }

    pub fn cy(&self) -> T {
        self.cy
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Largest admissible incidence angle.
    pub fn theta_max(&self) -> T {
        self.domain.theta_max
    }

    /// Whether `theta_max` itself belongs to the domain.
    pub fn theta_max_inclusive(&self) -> bool {
        self.domain.inclusive
    }

    /// Largest invertible radius in pixels (infinite for open domains).
    pub fn rho_max(&self) -> T {
        self.domain.rho_max
    }

    pub fn in_domain(&self, theta: T) -> bool {
        self.domain.contains(theta)
    }

    pub fn radial_forward(&self, theta: T) -> Result<T> {
        if !self.domain.contains(theta) {
            return Err(Error::Domain {
                theta: theta.as_f64(),
                theta_max: self.domain.theta_max.as_f64(),
            });
        }
        Ok(self.model.eval_unchecked(theta))
    }

    /// Incidence angle for a radius. Closed form for every model except the
    /// polynomial, which uses bracketed Newton iteration on `[0, theta_max]`.
    pub fn radial_inverse(&self, rho: T) -> Result<T> {
        if !(rho >= T::zero()) || rho > self.domain.rho_max || rho.is_infinite() {
            return Err(Error::NoRoot {
                rho: rho.as_f64(),
                rho_max: self.domain.rho_max.as_f64(),
            });
        }
        let one = T::one();
        let theta = match self.model {
            RadialModel::Polynomial { a, .. } => solve_poly(&a, self.domain.theta_max, rho),
            RadialModel::Rectilinear { f } => (rho / f).atan(),
            RadialModel::Stereographic { f } => T::lit(2.0) * (rho / (T::lit(2.0) * f)).atan(),
            RadialModel::Ucm { f, xi } => {
                let r = rho / f;
                let r2 = r * r;
                let disc = (one + r2 * (one - xi * xi)).max(T::zero());
                let c = (disc.sqrt() - r2 * xi) / (one + r2);
                (r * (c + xi)).atan2(c)
            }
            RadialModel::Eucm { f, alpha, beta } => {
                let r = rho / f;
                let r2 = r * r;
                let disc = (one - (T::lit(2.0) * alpha - one) * beta * r2).max(T::zero());
                let mz = (one - beta * alpha * alpha * r2) / (alpha * disc.sqrt() + one - alpha);
                r.atan2(mz)
            }
            RadialModel::DoubleSphere { f, xi, alpha } => {
                let r = rho / f;
                let r2 = r * r;
                let disc = (one - (T::lit(2.0) * alpha - one) * r2).max(T::zero());
                let mz = (one - alpha * alpha * r2) / (alpha * disc.sqrt() + one - alpha);
                let k = (mz * xi + (mz * mz + (one - xi * xi) * r2).sqrt()) / (mz * mz + r2);
                (k * r).atan2(k * mz - xi)
            }
        };
        Ok(theta)
    }

    /// Projects a camera-frame point to a pixel.
    pub fn project(&self, p: [T; 3]) -> Result<Projection<T>> {
        let [x, y, z] = p;
        let r = x.hypot(y);
        if r == T::zero() && z == T::zero() {
            return Err(Error::Degenerate("cannot project the zero vector".into()));
        }
        let theta = r.atan2(z);
        if !self.domain.contains(theta) {
            return Ok(Projection {
                u: T::nan(),
                v: T::nan(),
                valid: false,
            });
        }
        let rho = self.model.eval_unchecked(theta);
        let (u, v) = if r == T::zero() {
            (self.cx, self.cy)
        } else {
            (self.cx + rho * x / r, self.cy + rho * y / r)
        };
        let (w, h) = (T::from_usize_lossy(self.width), T::from_usize_lossy(self.height));
        let slack = pixel_slack(w.max(h));
        let valid = u >= -slack && v >= -slack && u <= w + slack && v <= h + slack;
        Ok(Projection { u, v, valid })
    }

    /// Unit ray through a pixel.
    pub fn unproject(&self, u: T, v: T) -> Result<[T; 3]> {
        let dx = u - self.cx;
        let dy = v - self.cy;
        let rho = dx.hypot(dy);
        let theta = self.radial_inverse(rho)?;
        Ok(ray_from_angle(theta, dx, dy, rho))
    }

    /// Like [`unproject`](Self::unproject) but resolves the angle through a
    /// lookup table built for this model.
    pub fn unproject_with_lut(&self, lut: &RootLut<T>, u: T, v: T) -> Result<[T; 3]> {
        let dx = u - self.cx;
        let dy = v - self.cy;
        let rho = dx.hypot(dy);
        let theta = lut.lookup(rho)?;
        Ok(ray_from_angle(theta, dx, dy, rho))
    }
}

fn ray_from_angle<T: Real>(theta: T, dx: T, dy: T, rho: T) -> [T; 3] {
    if rho == T::zero() {
        return [T::zero(), T::zero(), T::one()];
    }
    let (s, c) = theta.sin_cos();
    [s * dx / rho, s * dy / rho, c]
}

#[inline]
fn poly_eval<T: Real>(a: &[T; 4], t: T) -> T {
    t * (a[0] + t * (a[1] + t * (a[2] + t * a[3])))
}

#[inline]
fn poly_slope<T: Real>(a: &[T; 4], t: T) -> T {
    a[0] + t * (T::lit(2.0) * a[1] + t * (T::lit(3.0) * a[2] + t * T::lit(4.0) * a[3]))
}

/// Strict monotonicity of the polynomial on `[0, theta_max]`: the slope is
/// cubic, so its minimum sits at an endpoint or at a root of the quadratic
/// second derivative.
fn check_poly_monotone<T: Real>(a: &[T; 4], theta_max: T) -> Result<()> {
    let mut candidates = vec![T::zero(), theta_max];
    let (qa, qb, qc) = (T::lit(12.0) * a[3], T::lit(6.0) * a[2], T::lit(2.0) * a[1]);
    if qa != T::zero() {
        let disc = qb * qb - T::lit(4.0) * qa * qc;
        if disc >= T::zero() {
            let sq = disc.sqrt();
            candidates.push((-qb + sq) / (T::lit(2.0) * qa));
            candidates.push((-qb - sq) / (T::lit(2.0) * qa));
        }
    } else if qb != T::zero() {
        candidates.push(-qc / qb);
    }
    for t in candidates {
        if t < T::zero() || t > theta_max {
            continue;
        }
        let slope = poly_slope(a, t);
        if !(slope > T::zero()) {
            return Err(Error::NonMonotone {
                theta_max: theta_max.as_f64(),
                at: t.as_f64(),
                slope: slope.as_f64(),
            });
        }
    }
    Ok(())
}

/// Newton iteration seeded at `rho / a1`, kept inside a shrinking bracket;
/// any step leaving the bracket is replaced by bisection.
fn solve_poly<T: Real>(a: &[T; 4], theta_max: T, rho: T) -> T {
    if rho == T::zero() {
        return T::zero();
    }
    let tol = T::solver_tol();
    let (mut lo, mut hi) = (T::zero(), theta_max);
    let mut theta = if a[0] > T::zero() {
        (rho / a[0]).min(theta_max)
    } else {
        theta_max / T::lit(2.0)
    };
    for _ in 0..NEWTON_MAX_ITERS {
        let resid = poly_eval(a, theta) - rho;
        if resid == T::zero() {
            return theta;
        }
        if resid < T::zero() {
            lo = theta;
        } else {
            hi = theta;
        }
        let slope = poly_slope(a, theta);
        let mut next = theta - resid / slope;
        if !(slope > T::zero() && next >= lo && next <= hi) {
            next = (lo + hi) / T::lit(2.0);
        }
        if (next - theta).abs() <= tol {
            return next;
        }
        theta = next;
    }
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if poly_eval(a, mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::lit(2.0)
}

/// Precomputed polynomial roots: radius to incidence angle with linear
/// interpolation between entries spaced `step` pixels apart.
#[derive(Debug, Clone, PartialEq)]
pub struct RootLut<T> {
    model: Intrinsics<T>,
    step: T,
    rho_max: T,
    /// `(rho, theta)` pairs; the last radius is `rho_max` exactly.
    entries: Vec<(T, T)>,
}

impl<T: Real> RootLut<T> {
    pub fn build(model: &Intrinsics<T>, step: T) -> Result<Self> {
        if model.kind() != ModelKind::Polynomial {
            return Err(Error::InvalidParameter(format!(
                "root lookup tables are built for polynomial models, not {}",
                model.kind()
            )));
        }
        if !(step > T::zero()) || !step.is_finite() {
            return Err(Error::InvalidParameter(format!("lut step must be > 0, got {step}")));
        }
        let rho_max = model.rho_max();
        let n = (rho_max / step).ceil().to_usize().ok_or_else(|| {
            Error::InvalidParameter("lookup table size overflow".into())
        })?;
        let mut entries = Vec::with_capacity(n + 1);
        for i in 0..n {
            let rho = T::from_usize_lossy(i) * step;
            if rho >= rho_max {
                break;
            }
            entries.push((rho, model.radial_inverse(rho)?));
        }
        entries.push((rho_max, model.theta_max()));
        Ok(Self {
            model: model.clone(),
            step,
            rho_max,
            entries,
        })
    }

    pub fn model(&self) -> &Intrinsics<T> {
        &self.model
    }

    pub fn step(&self) -> T {
        self.step
    }

    pub fn rho_max(&self) -> T {
        self.rho_max
    }

    pub fn entries(&self) -> &[(T, T)] {
        &self.entries
    }

    pub fn lookup(&self, rho: T) -> Result<T> {
        if !(rho >= T::zero()) || rho > self.rho_max {
            return Err(Error::NoRoot {
                rho: rho.as_f64(),
                rho_max: self.rho_max.as_f64(),
            });
        }
        let last = self.entries.len() - 1;
        if last == 0 {
            return Ok(self.entries[0].1);
        }
        let i = (rho / self.step).floor().to_usize().unwrap_or(0).min(last - 1);
        let (r0, t0) = self.entries[i];
        let (r1, t1) = self.entries[i + 1];
        let frac = (rho - r0) / (r1 - r0);
        Ok(t0 + (t1 - t0) * frac)
    }
}
