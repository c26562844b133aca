use std::path::Path;
use std::process::{Command, Output};

use fdist_core::io::{self, NamedPose, Rig, RigCamera};
use fdist_core::synthetic::{flat_ground_rig, plane_scene};
use fdist_core::{ImageBuffer, LossReport, Pose};

fn fdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdist")).args(args).output().expect("spawn fdist")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct PlaneFixture {
    dir: tempfile::TempDir,
}

impl PlaneFixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let scene = plane_scene(48, 36).unwrap();
        let rig = Rig {
            cameras: vec![RigCamera {
                name: "front".into(),
                intrinsics: scene.target,
                extrinsics: None,
            }],
        };
        io::save_calibration(dir.path().join("rig.toml"), &rig).unwrap();
        io::save_image(dir.path().join("frame.png"), &scene.source_image).unwrap();
        io::save_distance_raw(dir.path().join("dist.fdt"), &scene.distance).unwrap();
        io::save_poses(
            dir.path().join("identity.toml"),
            &[NamedPose {
                name: "prev".into(),
                pose: Pose::identity(),
            }],
        )
        .unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> std::path::PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn selfcheck_passes_and_detects_perturbation() {
    let ok = fdist(&["selfcheck"]);
    assert!(ok.status.success());
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("22/22 checks passed"), "{text}");

    let bad = fdist(&["selfcheck", "--perturb", "robust.gradient"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8(bad.stdout).unwrap().contains("FAIL robust.gradient"));

    assert!(!fdist(&["selfcheck", "--perturb", "no.such.check"]).status.success());
}

#[test]
fn cgt_is_deterministic_and_renders_png() {
    let fx = PlaneFixture::new();
    let (a, b) = (fx.path("a.fdt"), fx.path("b.fdt"));
    let pngs = fx.path("png");
    for out in [&a, &b] {
        let o = fdist(&["cgt", "--calib", s(&fx.path("rig.toml")), "--camera", "front", "--out", s(out), "--png", s(&pngs)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let t = io::load_geometry_tensor::<f64>(&a).unwrap();
    assert_eq!((t.width(), t.height()), (48, 36));
    assert!(pngs.join("front_nc_x.png").exists());
    let range = std::fs::read_to_string(pngs.join("front_nc_x.png.range.txt")).unwrap();
    assert!(range.contains("min = -1.0") && range.contains("max = 1.0"), "{range}");

    let all = fx.path("all");
    let o = fdist(&["cgt", "--calib", s(&fx.path("rig.toml")), "--out", s(&all), "--width", "20", "--height", "10"]);
    assert!(o.status.success());
    let t = io::load_geometry_tensor::<f64>(all.join("front.fdt")).unwrap();
    assert_eq!((t.width(), t.height()), (20, 10));
}

#[test]
fn identity_warp_reproduces_source() {
    let fx = PlaneFixture::new();
    let out = fx.path("warped.png");
    let o = fdist(&[
        "warp",
        "--calib",
        s(&fx.path("rig.toml")),
        "--camera",
        "front",
        "--dist",
        s(&fx.path("dist.fdt")),
        "--pose",
        s(&fx.path("identity.toml")),
        "--src",
        s(&fx.path("frame.png")),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let src: ImageBuffer<f64> = io::load_image(fx.path("frame.png")).unwrap();
    let got: ImageBuffer<f64> = io::load_image(&out).unwrap();
    assert_eq!(src, got);
    let mask: ImageBuffer<f64> = io::load_image(fx.path("warped.mask.png")).unwrap();
    assert!(mask.data().iter().all(|&m| m == 1.0));
}

#[test]
fn loss_of_identical_frames_has_zero_reconstruction() {
    let fx = PlaneFixture::new();
    let report_path = fx.path("report.txt");
    let o = fdist(&[
        "loss",
        "--calib",
        s(&fx.path("rig.toml")),
        "--camera",
        "front",
        "--target",
        s(&fx.path("frame.png")),
        "--source",
        s(&fx.path("frame.png")),
        "--dist",
        s(&fx.path("dist.fdt")),
        "--pose",
        s(&fx.path("identity.toml")),
        "--out",
        s(&report_path),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let report: LossReport = stdout.parse().unwrap();
    assert_eq!(report.l_r, 0.0);
    assert!(report.l_s > 0.0);
    assert_eq!(std::fs::read_to_string(&report_path).unwrap(), stdout);

    let bad = fdist(&[
        "loss",
        "--calib",
        s(&fx.path("rig.toml")),
        "--camera",
        "front",
        "--target",
        s(&fx.path("frame.png")),
        "--source",
        s(&fx.path("frame.png")),
        "--dist",
        s(&fx.path("dist.fdt")),
        "--pose",
        s(&fx.path("identity.toml")),
        "--c",
        "0",
    ]);
    assert!(!bad.status.success());
}

#[test]
fn heightmap_of_flat_ground_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let views = flat_ground_rig(120, 90).unwrap();
    let rig = Rig {
        cameras: views
            .iter()
            .map(|v| RigCamera {
                name: v.name.to_string(),
                intrinsics: v.model.clone(),
                extrinsics: Some(v.extrinsics),
            })
            .collect(),
    };
    let calib = dir.path().join("rig.toml");
    io::save_calibration(&calib, &rig).unwrap();
    let mut args = vec!["heightmap".to_string(), "--calib".into(), s(&calib).into()];
    for v in &views {
        let p = dir.path().join(format!("{}.fdt", v.name));
        io::save_distance_raw(&p, &v.distance).unwrap();
        args.push("--dist".into());
        args.push(format!("{}={}", v.name, s(&p)));
    }
    let grid_path = dir.path().join("grid.fdh");
    let png = dir.path().join("grid.png");
    args.extend(["--out".into(), s(&grid_path).into(), "--png".into(), s(&png).into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = fdist(&refs);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let grid = io::load_grid::<f64>(&grid_path).unwrap();
    assert!(grid.known_count() > 1000);
    for (&z, &n) in grid.heights().iter().zip(grid.counts()) {
        if n > 0 {
            assert!(z.abs() <= 0.05, "height {z}");
        }
    }
    assert!(png.exists());

    let first = std::fs::read(&grid_path).unwrap();
    assert!(fdist(&refs).status.success());
    assert_eq!(first, std::fs::read(&grid_path).unwrap());

    let empty = fdist(&["heightmap", "--calib", s(&calib), "--out", s(&grid_path)]);
    assert!(!empty.status.success());
    assert!(String::from_utf8(empty.stderr).unwrap().contains("no distance maps"));
}
