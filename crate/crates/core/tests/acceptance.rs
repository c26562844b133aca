//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use fdist_core::geom_tensor::native_centered_coords;
use fdist_core::heightmap::{fuse_cameras, points_from_distance, project_to_grid, spatial_smooth, temporal_smooth};
use fdist_core::losses::{
    cross_entropy, min_reconstruction, mtl_loss, reconstruction_loss, robust_loss, robust_loss_grad,
    sigmoid_to_distance_value, SigmoidMapping,
};
use fdist_core::nn_kernels::{pairwise_attention, patchwise_attention, pixel_adaptive_conv, AttentionKind, Matrix, Zeta};
use fdist_core::synthetic::{flat_ground_rig, plane_scene};
use fdist_core::warp::synthesize_view;
use fdist_core::{
    assemble_tensor, selfcheck, AttentionParams, FeatureMap, FusionState, HeightGrid, ImageBuffer, Intrinsics,
    LabelMap, PacFilter, Pose, RadialModel, RobustParams, RootLut, UncertaintyParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn bound(what: &str, value: f64, limit: f64) -> Outcome {
    let msg = format!("{what} {value:.3e} (limit {limit:.0e})");
    if value < limit {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fail<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn cameras() -> Vec<Intrinsics<f64>> {
    let (w, h, cx, cy) = (1280, 966, 640.0, 483.0);
    vec![
        Intrinsics::polynomial([339.749, -31.988, 48.275, -7.201], cx, cy, w, h).unwrap(),
        Intrinsics::ucm(400.0, 0.9, cx, cy, w, h).unwrap(),
        Intrinsics::eucm(400.0, 0.6, 1.1, cx, cy, w, h).unwrap(),
        Intrinsics::rectilinear(500.0, cx, cy, w, h).unwrap(),
        Intrinsics::stereographic(300.0, cx, cy, w, h).unwrap(),
        Intrinsics::double_sphere(350.0, -0.2, 0.6, cx, cy, w, h).unwrap(),
    ]
}

fn round_trip_error(m: &Intrinsics<f64>, lut: Option<&RootLut<f64>>, rng: &mut ChaCha8Rng, n: usize) -> Result<f64, String> {
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < n {
        let u = rng.gen_range(0.0..m.width() as f64);
        let v = rng.gen_range(0.0..m.height() as f64);
        let ray = match lut {
            Some(l) => m.unproject_with_lut(l, u, v),
            None => m.unproject(u, v),
        };
        let Ok(ray) = ray else { continue };
        let p = m.project(ray).map_err(fail)?;
        worst = worst.max(((p.u - u).powi(2) + (p.v - v).powi(2)).sqrt());
        done += 1;
    }
    Ok(worst)
}

fn projection_round_trips() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut closed = 0.0f64;
    let (mut newton, mut via_lut) = (0.0f64, 0.0f64);
    for m in cameras() {
        if matches!(m.model(), RadialModel::Polynomial { .. }) {
            newton = round_trip_error(&m, None, &mut rng, 10_000)?;
            let lut = RootLut::build(&m, 0.25).map_err(fail)?;
            via_lut = round_trip_error(&m, Some(&lut), &mut rng, 10_000)?;
        } else {
            closed = closed.max(round_trip_error(&m, None, &mut rng, 10_000)?);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("closed {closed:.2e} px, newton {newton:.2e} px, lut {via_lut:.2e} px, {secs:.2} s");
    if closed < 1e-6 && newton < 1e-5 && via_lut < 1e-5 && secs < 5.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn model_reductions() -> Outcome {
    let f = 420.0;
    let make = |model| Intrinsics::new(model, 320.0, 240.0, 640, 480).unwrap();
    let reduced = [
        make(RadialModel::Ucm { f, xi: 0.0 }),
        make(RadialModel::Eucm { f, alpha: 0.0, beta: 1.3 }),
        make(RadialModel::DoubleSphere { f, xi: 0.0, alpha: 0.0 }),
    ];
    let mut worst = 0.0f64;
    for i in 1..1300 {
        let theta = i as f64 * 1e-3;
        let pinhole = f * theta.tan();
        for m in &reduced {
            let rho = m.radial_forward(theta).map_err(fail)?;
            worst = worst.max((rho - pinhole).abs() / pinhole);
        }
    }
    bound("max relative deviation from f tan(theta)", worst, 1e-12)
}

fn robust_loss_checks() -> Outcome {
    let mut closed = 0.0f64;
    for c in [0.3, 1.0, 2.5] {
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let z = (x / c).powi(2);
            let cases = [
                (2.0, z / 2.0),
                (1.0, (z + 1.0).sqrt() - 1.0),
                (0.0, (z / 2.0 + 1.0).ln()),
                (-2.0, 2.0 * z / (z + 4.0)),
                (f64::NEG_INFINITY, 1.0 - (-z / 2.0).exp()),
            ];
            for (alpha, expected) in cases {
                let p = RobustParams::new(alpha, c).map_err(fail)?;
                closed = closed.max((robust_loss(x, &p) - expected).abs());
            }
        }
    }
    let h = 1e-5;
    let mut grad = 0.0f64;
    for alpha in [-2.0, 0.0, 1.0, 2.0] {
        let p = RobustParams::new(alpha, 1.0).map_err(fail)?;
        for i in 0..60 {
            let x = -3.0 + 0.05 + i as f64 * 0.1;
            let fd = (robust_loss(x + h, &p) - robust_loss(x - h, &p)) / (2.0 * h);
            grad = grad.max((robust_loss_grad(x, &p) - fd).abs() / fd.abs());
        }
    }
    let spot = robust_loss(1.0, &RobustParams::new(1.0, 1.0).map_err(fail)?);
    let spot_err = (spot - (2f64.sqrt() - 1.0)).abs();
    let msg = format!("closed forms {closed:.2e}, gradient {grad:.2e} rel, rho(1; 1, 1) = {spot:.12}");
    if closed < 1e-10 && grad < 1e-5 && spot_err < 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn warp_checks() -> Outcome {
    let s = plane_scene(64, 48).map_err(fail)?;
    let v = synthesize_view(&s.distance, &s.target, &Pose::identity(), &s.source_image, &s.target).map_err(fail)?;
    let (w, h) = (v.image.width(), v.image.height());
    let mut mismatched = 0usize;
    let mut masked = 0usize;
    for y in 0..h {
        for x in 0..w {
            if v.mask.get(x, y) == 0 {
                continue;
            }
            masked += 1;
            for c in 0..v.image.channels() {
                mismatched += (v.image.get(x, y, c) != s.source_image.get(x, y, c)) as usize;
            }
        }
    }
    if masked == 0 || mismatched > 0 {
        return Err(format!("identity warp: {mismatched} mismatched samples over {masked} masked pixels"));
    }
    let robust = RobustParams::new(1.0, 0.01).map_err(fail)?;
    let l_r = |k: f64| -> Result<f64, String> {
        let d = s.distance.scaled(k).map_err(fail)?;
        let v = synthesize_view(&d, &s.target, &s.pose, &s.source_image, &s.source).map_err(fail)?;
        let map = reconstruction_loss(&s.target_image, &v.image, &v.mask, &robust, 0.85).map_err(fail)?;
        Ok(min_reconstruction(&[map]).map_err(fail)?.mean())
    };
    let (lo, gt, hi) = (l_r(0.9)?, l_r(1.0)?, l_r(1.1)?);
    let msg = format!("identity exact on {masked}/{} pixels; L_r 0.9x {lo:.4e}, 1.0x {gt:.4e}, 1.1x {hi:.4e}", w * h);
    if gt < lo && gt < hi {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, c: usize) -> FeatureMap<f64> {
    FeatureMap::new(w, h, c, (0..w * h * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix<f64> {
    Matrix::from_fn(r, c, |_, _| rng.gen_range(-1.0..1.0))
}

fn in_bounds(i: usize, d: usize, r: usize, n: usize) -> Option<usize> {
    let p = (i + d).checked_sub(r)?;
    (p < n).then_some(p)
}

fn dot(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).fold(0.0, |s, (a, b)| s + a * b)
}

fn mat_vec(m: &Matrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.rows()).map(|r| dot(&m.data()[r * m.cols()..(r + 1) * m.cols()], v)).collect()
}

fn brute_pac(x: &FeatureMap<f64>, g: &FeatureMap<f64>, f: &PacFilter<f64>) -> FeatureMap<f64> {
    let (w, h, k) = (x.width(), x.height(), f.k());
    let r = k / 2;
    let mut out = FeatureMap::zeros(w, h, f.c_out());
    for i in 0..h {
        for j in 0..w {
            for o in 0..f.c_out() {
                let mut acc = 0.0;
                for dy in 0..k {
                    let Some(a) = in_bounds(i, dy, r, h) else { continue };
                    for dx in 0..k {
                        let Some(b) = in_bounds(j, dx, r, w) else { continue };
                        let d2 = (0..g.channels()).fold(0.0, |s, c| s + (g.get(j, i, c) - g.get(b, a, c)).powi(2));
                        let kern = (-0.5 * d2 / (f.sigma() * f.sigma())).exp();
                        let conv = (0..f.c_in()).fold(0.0, |s, c| s + f.weight(o, c, dy, dx) * x.get(b, a, c));
                        acc += kern * conv;
                    }
                }
                out.set(j, i, o, acc + f.bias()[o]);
            }
        }
    }
    out
}

fn brute_attention(kind: AttentionKind, x: &FeatureMap<f64>, p: &AttentionParams<f64>) -> FeatureMap<f64> {
    let (w, h, r, c_out) = (x.width(), x.height(), p.radius(), p.c_out());
    let n = 2 * r + 1;
    let zeta = p.zeta();
    let mut out = FeatureMap::zeros(w, h, c_out);
    for i in 0..h {
        for j in 0..w {
            let phi = mat_vec(p.phi(), x.pixel(j, i));
            let positions: Vec<Option<(usize, usize)>> =
                (0..n * n).map(|q| Some((in_bounds(i, q / n, r, h)?, in_bounds(j, q % n, r, w)?))).collect();
            let scores: Vec<Option<Vec<f64>>> = match kind {
                AttentionKind::Pairwise => positions
                    .iter()
                    .map(|pos| {
                        let (a, b) = (*pos)?;
                        let psi = mat_vec(p.psi(), x.pixel(b, a));
                        let rel: Vec<f64> = phi.iter().zip(&psi).map(|(u, v)| u * v).collect();
                        Some(mat_vec(&zeta.weight, &rel).iter().zip(&zeta.bias).map(|(s, b)| s + b).collect())
                    })
                    .collect(),
                AttentionKind::Patchwise => {
                    let mut rel = phi.clone();
                    for pos in &positions {
                        match pos {
                            Some((a, b)) => rel.extend(mat_vec(p.psi(), x.pixel(*b, *a))),
                            None => rel.extend(vec![0.0; phi.len()]),
                        }
                    }
                    let all: Vec<f64> = mat_vec(&zeta.weight, &rel).iter().zip(&zeta.bias).map(|(s, b)| s + b).collect();
                    positions
                        .iter()
                        .enumerate()
                        .map(|(q, pos)| pos.map(|_| all[q * c_out..(q + 1) * c_out].to_vec()))
                        .collect()
                }
            };
            for o in 0..c_out {
                let present = scores.iter().flatten().map(|s| s[o]);
                let max = present.clone().fold(f64::NEG_INFINITY, f64::max);
                let (shift, norm) = if zeta.normalize {
                    (max, present.fold(0.0, |s, v| s + (v - max).exp()))
                } else {
                    (0.0, 1.0)
                };
                let mut acc = 0.0;
                for (pos, s) in positions.iter().zip(&scores) {
                    let (Some((a, b)), Some(s)) = (pos, s) else { continue };
                    let chi = mat_vec(p.chi(), x.pixel(*b, *a));
                    acc += (s[o] - shift).exp() / norm * chi[o];
                }
                out.set(j, i, o, acc);
            }
        }
    }
    out
}

fn max_diff(a: &FeatureMap<f64>, b: &FeatureMap<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn kernel_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut pac, mut pair, mut patch) = (0.0f64, 0.0f64, 0.0f64);
    for trial in 0..12 {
        let (w, h) = (rng.gen_range(3..8), rng.gen_range(3..8));
        let (ci, co, d) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
        let x = random_map(&mut rng, w, h, ci);
        let guide = random_map(&mut rng, w, h, 2);
        let k = [1, 3, 5][trial % 3];
        let filter = PacFilter::new(
            k,
            ci,
            co,
            (0..k * k * ci * co).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            (0..co).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            rng.gen_range(0.3..2.0),
        )
        .map_err(fail)?;
        pac = pac.max(max_diff(&pixel_adaptive_conv(&x, &guide, &filter).map_err(fail)?, &brute_pac(&x, &guide, &filter)));

        let radius = trial % 3;
        let positions = (2 * radius + 1) * (2 * radius + 1);
        let normalize = trial % 2 == 0;
        for kind in [AttentionKind::Pairwise, AttentionKind::Patchwise] {
            let (zr, zc) = match kind {
                AttentionKind::Pairwise => (ci, d),
                AttentionKind::Patchwise => (positions * ci, d + positions * d),
            };
            let zeta = Zeta {
                weight: random_matrix(&mut rng, zr, zc),
                bias: (0..zr).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                normalize,
            };
            let params = AttentionParams::new(
                kind,
                radius,
                random_matrix(&mut rng, d, ci),
                random_matrix(&mut rng, d, ci),
                random_matrix(&mut rng, ci, ci),
                zeta,
            )
            .map_err(fail)?;
            let expected = brute_attention(kind, &x, &params);
            match kind {
                AttentionKind::Pairwise => pair = pair.max(max_diff(&pairwise_attention(&x, &params).map_err(fail)?, &expected)),
                AttentionKind::Patchwise => patch = patch.max(max_diff(&patchwise_attention(&x, &params).map_err(fail)?, &expected)),
            }
        }
    }

    let x = random_map(&mut rng, 7, 6, 2);
    let flat = FeatureMap::new(7, 6, 3, vec![0.25; 7 * 6 * 3]).map_err(fail)?;
    let filter = PacFilter::new(3, 2, 2, (0..36).map(|_| rng.gen_range(-1.0..1.0)).collect(), vec![0.1, -0.2], 0.5)
        .map_err(fail)?;
    let got = pixel_adaptive_conv(&x, &flat, &filter).map_err(fail)?;
    let mut conv = FeatureMap::zeros(7, 6, 2);
    for i in 0..6isize {
        for j in 0..7isize {
            for o in 0..2 {
                let mut acc = filter.bias()[o];
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (a, b) = (i + dy, j + dx);
                        if a < 0 || b < 0 || a >= 6 || b >= 7 {
                            continue;
                        }
                        for c in 0..2 {
                            acc += filter.weight(o, c, (dy + 1) as usize, (dx + 1) as usize) * x.get(b as usize, a as usize, c);
                        }
                    }
                }
                conv.set(j as usize, i as usize, o, acc);
            }
        }
    }
    let constant = max_diff(&got, &conv);
    let msg = format!("12 instances: pac {pac:.2e}, pairwise {pair:.2e}, patchwise {patch:.2e}; constant guidance {constant:.2e}");
    if pac < 1e-12 && pair < 1e-12 && patch < 1e-12 && constant < 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn geometry_tensor_checks() -> Outcome {
    let f = 310.0;
    let pinhole = Intrinsics::rectilinear(f, 320.0, 240.0, 640, 480).map_err(fail)?;
    let t = assemble_tensor(&pinhole, 640, 480).map_err(fail)?;
    for (name, plane) in [("nc_x", &t.nc_x), ("nc_y", &t.nc_y)] {
        let lo = plane.data().iter().copied().fold(f64::INFINITY, f64::min);
        let hi = plane.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo != -1.0 || hi != 1.0 {
            return Err(format!("{name} spans [{lo}, {hi}]"));
        }
    }
    let (ccx, ccy) = native_centered_coords(&pinhole);
    if ccx.get(320, 240) != 0.0 || ccy.get(320, 240) != 0.0 {
        return Err("centered coordinates do not vanish at the principal point".into());
    }
    let mut worst = 0.0f64;
    for (&cc, &a) in t.cc_x.data().iter().zip(t.a_x.data()) {
        worst = worst.max((f * a.tan() - cc).abs());
    }
    if worst >= 1e-9 {
        return Err(format!("pinhole f tan(a_x) deviates from cc_x by {worst:.3e}"));
    }
    let start = Instant::now();
    for m in &cameras()[..4] {
        let rig_cam = Intrinsics::new(*m.model(), 640.0, 483.0, 1280, 966).map_err(fail)?;
        assemble_tensor(&rig_cam, 640, 480).map_err(fail)?;
    }
    let secs = start.elapsed().as_secs_f64();
    let msg = format!("nc spans [-1, 1], cc(pp) = 0, pinhole deviation {worst:.2e}, 4-camera rig {secs:.3} s");
    if secs < 2.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn height_map_checks() -> Outcome {
    let rig = flat_ground_rig(160, 120).map_err(fail)?;
    let base = HeightGrid::<f64>::default();
    let mut grids = Vec::new();
    for view in &rig {
        let pts = points_from_distance(&view.distance, &view.model, &view.extrinsics).map_err(fail)?;
        grids.push(project_to_grid(&pts, &base));
    }
    let fused = fuse_cameras(&grids).map_err(fail)?;
    let (mut ok, mut known) = (0usize, 0usize);
    for (&z, &n) in fused.heights().iter().zip(fused.counts()) {
        if n > 0 {
            known += 1;
            ok += (z.abs() <= 0.05) as usize;
        }
    }
    let frac = ok as f64 / known.max(1) as f64;
    if known == 0 || frac < 0.99 {
        return Err(format!("flat ground: {ok}/{known} cells within 0.05 m"));
    }

    let side = 10;
    let mut heights = vec![0.0; side * side];
    heights[5 * side + 5] = 3.0;
    let spiky = HeightGrid::from_parts(0.5, 2.5, heights, vec![1; side * side]).map_err(fail)?;
    let smoothed = spatial_smooth(&spiky);
    if smoothed.height(5, 5) != Some(0.0) {
        return Err(format!("spike survives median: {:?}", smoothed.height(5, 5)));
    }

    let constant = |z: f64| HeightGrid::from_parts(0.5, 2.5, vec![z; side * side], vec![1; side * side]);
    let mut state = FusionState::new(0.5).map_err(fail)?;
    temporal_smooth(&constant(0.0).map_err(fail)?, &mut state).map_err(fail)?;
    let blended = temporal_smooth(&constant(2.0).map_err(fail)?, &mut state).map_err(fail)?;
    if blended.heights().iter().any(|&z| z != 1.0) {
        return Err("temporal blend of 2 over 0 with lambda 0.5 is not 1".into());
    }
    Ok(format!("flat ground {ok}/{known} cells ({:.2}%), spike removed, blend = 1", frac * 100.0))
}

fn spot_values() -> Outcome {
    let mtl: f64 = mtl_loss(2.0, 4.0, &UncertaintyParams::new(1.0, 1.0).map_err(fail)?);
    if (mtl - 4.38629).abs() > 1e-5 {
        return Err(format!("mtl_loss(2, 4) = {mtl}"));
    }
    let s = 7;
    let posteriors = ImageBuffer::new(4, 3, s, vec![1.0 / s as f64; 4 * 3 * s]).map_err(fail)?;
    let labels = LabelMap::from_fn(4, 3, |x, y| ((x + y) % s) as u8);
    let ce: f64 = cross_entropy(&posteriors, &labels).map_err(fail)?;
    if (ce - (s as f64).ln()).abs() > 1e-9 {
        return Err(format!("uniform cross entropy {ce} != ln {s}"));
    }
    for mode in [SigmoidMapping::Direct, SigmoidMapping::Inverse] {
        let a: f64 = sigmoid_to_distance_value(0.0, mode).map_err(fail)?;
        let b: f64 = sigmoid_to_distance_value(1.0, mode).map_err(fail)?;
        let (lo, hi) = (a.min(b), a.max(b));
        if lo != 0.1 || hi != 100.0 {
            return Err(format!("{mode:?} endpoints {a}, {b}"));
        }
    }
    Ok(format!("mtl {mtl:.6}, uniform CE {ce:.12} = ln {s}, sigmoid endpoints 0.1 m / 100 m"))
}

fn selfcheck_suite() -> Outcome {
    let start = Instant::now();
    let first = selfcheck::run(&selfcheck::Options::default());
    let second = selfcheck::run(&selfcheck::Options::default());
    let secs = start.elapsed().as_secs_f64() / 2.0;
    let n = first.results.len();
    let passed = first.results.iter().filter(|r| r.passed).count();
    let msg = format!("{passed}/{n} checks passed, {secs:.2} s per run");
    if first != second {
        return Err(format!("{msg}; runs differ"));
    }
    if first.all_passed() && n == selfcheck::CHECKS.len() && secs < 60.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("projection round trips", projection_round_trips),
        ("model reductions", model_reductions),
        ("robust loss", robust_loss_checks),
        ("identity warp and plane photometric", warp_checks),
        ("kernel oracles", kernel_oracles),
        ("camera geometry tensor", geometry_tensor_checks),
        ("height map", height_map_checks),
        ("loss spot values", spot_values),
        ("selfcheck", selfcheck_suite),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
