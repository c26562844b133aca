use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fdist_core::geom_tensor::CHANNEL_NAMES;
use fdist_core::heightmap::{fuse_cameras, points_from_distance, project_to_grid, spatial_smooth};
use fdist_core::io::{self, Rig, RigCamera};
use fdist_core::losses::{
    apply_fraction, cross_entropy, distance_consistency, dynamic_mask, min_reconstruction, motion_flag, mtl_loss,
    reconstruction_loss, smoothness, total_distance_loss, DistanceLossParts,
};
use fdist_core::warp::{nearest_sample, sample_distance, synthesize_view};
use fdist_core::{assemble_tensor, selfcheck, DistanceMap, HeightGrid, ImageBuffer, LossReport, RobustParams};

use crate::colormap::save_colormap;
use crate::{CgtArgs, HeightmapArgs, LossArgs, SelfcheckArgs, WarpArgs};

fn load_rig(path: &Path) -> Result<Rig> {
    io::load_calibration(path).with_context(|| format!("reading calibration {}", path.display()))
}

fn rig_camera<'a>(rig: &'a Rig, name: &str) -> Result<&'a RigCamera> {
    rig.camera(name).ok_or_else(|| anyhow!("camera \"{name}\" not in calibration"))
}

/// 16-bit PNG when the extension says so, raw tensor otherwise.
fn load_distance(path: &Path) -> Result<DistanceMap<f64>> {
    let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let d = if is_png { io::load_distance_png(path) } else { io::load_distance_raw(path) };
    d.with_context(|| format!("reading distance map {}", path.display()))
}

fn load_image(path: &Path) -> Result<ImageBuffer<f64>> {
    io::load_image(path).with_context(|| format!("reading image {}", path.display()))
}

fn check_size(what: &str, w: usize, h: usize, cam: &RigCamera) -> Result<()> {
    let (cw, ch) = (cam.intrinsics.width(), cam.intrinsics.height());
    if (w, h) != (cw, ch) {
        bail!("{what} is {w}x{h} but camera \"{}\" is {cw}x{ch}", cam.name);
    }
    Ok(())
}

pub fn cgt(a: &CgtArgs) -> Result<bool> {
    let rig = load_rig(&a.calib)?;
    let cams: Vec<&RigCamera> = match &a.camera {
        Some(name) => vec![rig_camera(&rig, name)?],
        None => rig.cameras.iter().collect(),
    };
    if a.camera.is_none() {
        std::fs::create_dir_all(&a.out)?;
    }
    if let Some(dir) = &a.png {
        std::fs::create_dir_all(dir)?;
    }
    for cam in cams {
        let w = a.width.unwrap_or(cam.intrinsics.width());
        let h = a.height.unwrap_or(cam.intrinsics.height());
        let t = assemble_tensor(&cam.intrinsics, w, h).with_context(|| format!("camera \"{}\"", cam.name))?;
        let out = match &a.camera {
            Some(_) => a.out.clone(),
            None => a.out.join(format!("{}.fdt", cam.name)),
        };
        io::save_geometry_tensor(&out, &t)?;
        if let Some(dir) = &a.png {
            for (plane, ch) in t.channels().iter().zip(CHANNEL_NAMES) {
                let known = vec![true; w * h];
                save_colormap(&dir.join(format!("{}_{ch}.png", cam.name)), w, h, plane.data(), &known)?;
            }
        }
        eprintln!("{}: {w}x{h} tensor -> {}", cam.name, out.display());
    }
    Ok(true)
}

fn pick_pose(path: &Path, name: Option<&str>) -> Result<fdist_core::Pose<f64>> {
    let poses = io::load_poses(path).with_context(|| format!("reading poses {}", path.display()))?;
    let p = match name {
        Some(n) => poses.iter().find(|p| p.name == n).ok_or_else(|| anyhow!("pose \"{n}\" not found"))?,
        None => poses.first().ok_or_else(|| anyhow!("pose document is empty"))?,
    };
    Ok(p.pose)
}

fn default_mask_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.mask.png"))
}

pub fn warp(a: &WarpArgs) -> Result<bool> {
    let rig = load_rig(&a.calib)?;
    let target = rig_camera(&rig, &a.camera)?;
    let source = rig_camera(&rig, a.source_camera.as_deref().unwrap_or(&a.camera))?;
    let dist = load_distance(&a.dist)?;
    check_size("distance map", dist.width(), dist.height(), target)?;
    let src = load_image(&a.src)?;
    check_size("source image", src.width(), src.height(), source)?;
    let pose = pick_pose(&a.pose, a.pose_name.as_deref())?;
    let view = synthesize_view(&dist, &target.intrinsics, &pose, &src, &source.intrinsics)?;
    io::save_image(&a.out, &view.image)?;
    let mask_path = a.mask.clone().unwrap_or_else(|| default_mask_path(&a.out));
    let mask_img = ImageBuffer::from_plane(&view.mask.map(|m| if m != 0 { 1.0 } else { 0.0 }));
    io::save_image(&mask_path, &mask_img)?;
    let inside = view.mask.data().iter().filter(|&&m| m != 0).count();
    eprintln!("{inside}/{} target pixels sampled inside the source", view.mask.data().len());
    Ok(true)
}

fn load_posteriors(path: &Path) -> Result<ImageBuffer<f64>> {
    let block = io::load_blocks(path)?.into_iter().next().ok_or_else(|| anyhow!("posterior file holds no tensor"))?;
    let mut img = ImageBuffer::zeros(block.width, block.height, block.channels);
    for c in 0..block.channels {
        let plane = block.plane::<f64>(c);
        for y in 0..block.height {
            for x in 0..block.width {
                img.set(x, y, c, plane.get(x, y));
            }
        }
    }
    Ok(img)
}

pub fn loss(a: &LossArgs) -> Result<bool> {
    let mut settings = match &a.weights {
        Some(p) => io::load_weights(p).with_context(|| format!("reading weights {}", p.display()))?,
        None => io::LossSettings::default(),
    };
    if a.alpha.is_some() || a.c.is_some() {
        settings.robust = RobustParams::new(
            a.alpha.unwrap_or(settings.robust.alpha()),
            a.c.unwrap_or(settings.robust.c()),
        )?;
    }
    let w = settings.weights;

    let rig = load_rig(&a.calib)?;
    let cam = rig_camera(&rig, &a.camera)?;
    let model = &cam.intrinsics;
    let target = load_image(&a.target)?;
    check_size("target image", target.width(), target.height(), cam)?;
    let dist = load_distance(&a.dist)?;
    check_size("distance map", dist.width(), dist.height(), cam)?;
    let poses = io::load_poses(&a.pose).with_context(|| format!("reading poses {}", a.pose.display()))?;
    if poses.len() != a.sources.len() {
        bail!("{} sources but {} poses", a.sources.len(), poses.len());
    }
    if !a.source_labels.is_empty() && a.source_labels.len() != a.sources.len() {
        bail!("--source-labels must be given once per source");
    }
    if !a.source_dists.is_empty() && a.source_dists.len() != a.sources.len() {
        bail!("--source-dist must be given once per source");
    }
    let labels = a.labels.as_deref().map(io::load_labels).transpose()?;

    let mut maps = Vec::with_capacity(a.sources.len());
    let mut grids = Vec::with_capacity(a.sources.len());
    for (path, pose) in a.sources.iter().zip(&poses) {
        let src = load_image(path)?;
        if !src.same_shape(&target) {
            bail!("source {} does not match the target shape", path.display());
        }
        let view = synthesize_view(&dist, model, &pose.pose, &src, model)?;
        maps.push(reconstruction_loss(&target, &view.image, &view.mask, &settings.robust, w.tau)?);
        grids.push(view);
    }

    if let (Some((t_labels, table)), false) = (&labels, a.source_labels.is_empty()) {
        let dynamic = table.dynamic_set();
        let mut flags = Vec::new();
        let mut masks = Vec::new();
        for (path, view) in a.source_labels.iter().zip(&grids) {
            let (s_labels, _) = io::load_labels(path)?;
            // Pixels outside the ego-mask are already invalid; the fill value is irrelevant.
            let warped = nearest_sample(&s_labels, &view.grid, 0);
            flags.push(motion_flag(t_labels, &warped, &dynamic)?);
            masks.push(dynamic_mask(t_labels, &warped, &dynamic)?);
        }
        let apply = apply_fraction(&flags, w.epsilon_frac)?;
        for ((map, mu), on) in maps.iter_mut().zip(&masks).zip(apply) {
            if on {
                *map = map.multiply_mask(mu)?;
            }
        }
    }

    let l_r = min_reconstruction(&maps)?.mean();
    let l_s = smoothness(&dist, &target)?;
    let mut l_dc = 0.0;
    if !a.source_dists.is_empty() {
        for (path, view) in a.source_dists.iter().zip(&grids) {
            let sd = load_distance(path)?;
            check_size("source distance map", sd.width(), sd.height(), cam)?;
            let warped = sample_distance(&sd, &view.grid)?;
            l_dc += distance_consistency(&dist, &warped, Some(&view.mask))?;
        }
        l_dc /= a.source_dists.len() as f64;
    }
    let parts = DistanceLossParts {
        reconstruction: l_r,
        smoothness: l_s,
        consistency: l_dc,
    };
    let l_tot = total_distance_loss(&parts, &w);
    let l_ce = match (&a.posteriors, &labels) {
        (Some(p), Some((t_labels, _))) => cross_entropy(&load_posteriors(p)?, t_labels)?,
        (Some(_), None) => bail!("--posteriors requires --labels"),
        _ => 0.0,
    };
    let report = LossReport {
        l_r,
        l_s,
        l_dc,
        l_tot,
        l_ce,
        mtl: mtl_loss(l_tot, l_ce, &settings.uncertainty),
    };
    print!("{report}");
    if let Some(out) = &a.out {
        std::fs::write(out, report.to_string())?;
    }
    Ok(true)
}

pub fn heightmap(a: &HeightmapArgs) -> Result<bool> {
    if a.dists.is_empty() {
        bail!("no distance maps given (use --dist camera=path)");
    }
    let rig = load_rig(&a.calib)?;
    let empty = HeightGrid::new(a.cell, a.range)?;
    let mut grids = Vec::with_capacity(a.dists.len());
    for pair in &a.dists {
        let (name, path) = pair.split_once('=').ok_or_else(|| anyhow!("expected camera=path, got \"{pair}\""))?;
        let cam = rig_camera(&rig, name)?;
        let ext = cam.extrinsics.ok_or_else(|| anyhow!("camera \"{name}\" has no extrinsics"))?;
        let dist = load_distance(Path::new(path))?;
        check_size("distance map", dist.width(), dist.height(), cam)?;
        let points = points_from_distance(&dist, &cam.intrinsics, &ext)?;
        grids.push(project_to_grid(&points, &empty));
    }
    let mut grid = fuse_cameras(&grids)?;
    if a.smooth {
        grid = spatial_smooth(&grid);
    }
    io::save_grid(&a.out, &grid)?;
    if let Some(png) = &a.png {
        let side = grid.side();
        let known: Vec<bool> = grid.counts().iter().map(|&c| c > 0).collect();
        save_colormap(png, side, side, grid.heights(), &known)?;
    }
    eprintln!("{} of {} cells known", grid.known_count(), grid.side() * grid.side());
    Ok(true)
}

pub fn selfcheck(a: &SelfcheckArgs) -> Result<bool> {
    if a.list {
        for name in selfcheck::check_names() {
            println!("{name}");
        }
        return Ok(true);
    }
    if let Some(p) = &a.perturb {
        if !selfcheck::check_names().any(|n| n == p) {
            bail!("unknown check \"{p}\"");
        }
    }
    let report = selfcheck::run(&selfcheck::Options {
        perturb: a.perturb.clone(),
        filter: a.filter.clone(),
    });
    if report.results.is_empty() {
        bail!("filter matched no checks");
    }
    print!("{report}");
    Ok(report.all_passed())
}
