use std::path::Path;

use anyhow::Result;
use fdist_core::io::raster::save_rgb8;

/// Renders `values` with viridis between their finite min and max. Entries
/// with `known == false` are drawn black. Writes `<png>.range.txt` with the
/// limits next to the image.
pub fn save_colormap(path: &Path, width: usize, height: usize, values: &[f64], known: &[bool]) -> Result<()> {
    let (lo, hi) = values
        .iter()
        .zip(known)
        .filter(|(v, &k)| k && v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), (&v, _)| (l.min(v), h.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut rgb = Vec::with_capacity(values.len() * 3);
    for (&v, &k) in values.iter().zip(known) {
        if k && v.is_finite() {
            let c = colorous::VIRIDIS.eval_continuous(((v - lo) / span).clamp(0.0, 1.0));
            rgb.extend_from_slice(&[c.r, c.g, c.b]);
        } else {
            rgb.extend_from_slice(&[0, 0, 0]);
        }
    }
    save_rgb8(path, width, height, rgb)?;
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (0.0, 0.0) };
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".range.txt");
    std::fs::write(sidecar, format!("colormap = viridis\nmin = {lo:.9e}\nmax = {hi:.9e}\n"))?;
    Ok(())
}
