use fdist_core::camera::{Intrinsics, ModelKind, RadialModel, RootLut};
use proptest::prelude::*;

const W: usize = 1280;
const H: usize = 966;

fn sample_models() -> Vec<Intrinsics<f64>> {
    let (cx, cy) = (640.3, 483.7);
    vec![
        Intrinsics::polynomial([339.749, -31.988, 48.275, -7.201], cx, cy, W, H).unwrap(),
        Intrinsics::ucm(300.0, 0.9, cx, cy, W, H).unwrap(),
        Intrinsics::eucm(300.0, 0.62, 1.1, cx, cy, W, H).unwrap(),
        Intrinsics::rectilinear(400.0, cx, cy, W, H).unwrap(),
        Intrinsics::stereographic(250.0, cx, cy, W, H).unwrap(),
        Intrinsics::double_sphere(300.0, -0.2, 0.6, cx, cy, W, H).unwrap(),
    ]
}

/// Brute-force scan for the end of the region where `rho` is finite,
/// positive-denominator and strictly increasing.
fn scanned_theta_max(m: &RadialModel<f64>) -> f64 {
    let n = 200_000;
    let step = std::f64::consts::PI / n as f64;
    let mut prev = 0.0;
    for i in 1..=n {
        let t = i as f64 * step;
        let r = m.eval_unchecked(t);
        if !r.is_finite() || r <= prev {
            return t - step;
        }
        prev = r;
    }
    std::f64::consts::PI
}

#[test]
fn analytic_domains_match_scan() {
    let models = [
        RadialModel::Ucm { f: 1.0, xi: 0.0 },
        RadialModel::Ucm { f: 1.0, xi: 0.5 },
        RadialModel::Ucm { f: 1.0, xi: 1.7 },
        RadialModel::Eucm { f: 1.0, alpha: 0.3, beta: 1.2 },
        RadialModel::Eucm { f: 1.0, alpha: 0.7, beta: 0.9 },
        RadialModel::Eucm { f: 1.0, alpha: 0.9, beta: 2.0 },
        RadialModel::DoubleSphere { f: 1.0, xi: -0.2, alpha: 0.6 },
        RadialModel::DoubleSphere { f: 1.0, xi: 0.3, alpha: 0.4 },
        RadialModel::DoubleSphere { f: 1.0, xi: 0.8, alpha: 0.8 },
    ];
    for m in models {
        let cam = Intrinsics::new(m, 0.0, 0.0, 10, 10).unwrap();
        let scanned = scanned_theta_max(&m);
        assert!(
            (cam.theta_max() - scanned).abs() < 2e-4,
            "{m:?}: analytic {} vs scanned {}",
            cam.theta_max(),
            scanned
        );
    }
}

#[test]
fn closed_form_inverse_round_trips_over_domain() {
    for cam in sample_models() {
        let tmax = cam.theta_max();
        let tol = if cam.kind() == ModelKind::Polynomial { 1e-9 } else { 1e-10 };
        for i in 0..=1000 {
            let t = tmax * (i as f64 / 1000.0) * 0.999;
            let rho = cam.radial_forward(t).unwrap();
            let back = cam.radial_inverse(rho).unwrap();
            assert!((back - t).abs() < tol, "{}: theta {t} -> {back}", cam.kind());
        }
    }
}

#[test]
fn reductions_to_rectilinear() {
    let rect = Intrinsics::rectilinear(2.0, 0.0, 0.0, 10, 10).unwrap();
    let reduced = [
        Intrinsics::ucm(2.0, 0.0, 0.0, 0.0, 10, 10).unwrap(),
        Intrinsics::eucm(2.0, 0.0, 1.3, 0.0, 0.0, 10, 10).unwrap(),
        Intrinsics::double_sphere(2.0, 0.0, 0.0, 0.0, 0.0, 10, 10).unwrap(),
    ];
    for m in &reduced {
        assert_eq!(m.theta_max(), rect.theta_max());
        for i in 1..1300 {
            let t = i as f64 * 1e-3;
            let (a, b) = (m.radial_forward(t).unwrap(), rect.radial_forward(t).unwrap());
            assert!((a - b).abs() <= 1e-12 * b, "{}: {a} vs {b}", m.kind());
        }
    }
}

#[test]
fn lut_agrees_with_bisection_oracle() {
    // Unit-scale polynomial: curvature of theta(rho) is large relative to the
    // pixel grid, so a finer step is needed for 1e-5 rad.
    let cam = Intrinsics::polynomial([1.0, 0.1, 0.0, 0.0], 0.0, 0.0, 4, 4).unwrap();
    let lut = RootLut::build(&cam, 0.01).unwrap();
    let (mut lo, mut hi) = (0.0f64, cam.theta_max());
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if mid + 0.1 * mid * mid < 0.525 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let oracle = 0.5 * (lo + hi);
    assert!((lut.lookup(0.525).unwrap() - oracle).abs() < 1e-5);
    for &(rho, theta) in lut.entries() {
        assert!((cam.radial_forward(theta).unwrap() - rho).abs() < 1e-6);
    }
}

#[test]
fn lut_default_step_on_realistic_lens() {
    let cam = &sample_models()[0];
    let lut = RootLut::build(cam, 0.25).unwrap();
    assert!(lut.entries().windows(2).all(|w| w[1].1 > w[0].1));
    for i in 0..5000 {
        let rho = cam.rho_max() * i as f64 / 5000.0;
        let err = (lut.lookup(rho).unwrap() - cam.radial_inverse(rho).unwrap()).abs();
        assert!(err < 1e-5, "rho {rho}: {err}");
    }
}

#[test]
fn f32_models_work() {
    let cam = Intrinsics::<f32>::eucm(300.0, 0.62, 1.1, 640.0, 480.0, 1280, 960).unwrap();
    let ray = cam.unproject(900.0, 300.0).unwrap();
    let p = cam.project(ray).unwrap();
    assert!((p.u - 900.0).abs() < 1e-2 && (p.v - 300.0).abs() < 1e-2);
}

proptest! {
    #[test]
    fn project_unproject_round_trip(model in 0usize..6, fx in 0.0f64..1.0, fy in 0.0f64..1.0) {
        let cam = &sample_models()[model];
        let (u, v) = (fx * W as f64, fy * H as f64);
        let rho = (u - cam.cx()).hypot(v - cam.cy());
        prop_assume!(rho < cam.rho_max());
        let ray = cam.unproject(u, v).unwrap();
        let norm = (ray[0] * ray[0] + ray[1] * ray[1] + ray[2] * ray[2]).sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        let p = cam.project(ray).unwrap();
        prop_assert!((p.u - u).hypot(p.v - v) < 1e-6);
    }

    #[test]
    fn projection_preserves_azimuth(model in 0usize..6, x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.2f64..2.0) {
        prop_assume!(x * x + y * y > 1e-6);
        let cam = &sample_models()[model];
        let p = cam.project([x, y, z]).unwrap();
        prop_assume!(p.u.is_finite());
        let az = (p.v - cam.cy()).atan2(p.u - cam.cx());
        prop_assert!((az - y.atan2(x)).abs() < 1e-12);
    }
}
