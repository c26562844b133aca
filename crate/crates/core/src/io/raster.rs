//! PNG images, 16-bit distance maps and label maps with class tables.

use std::collections::BTreeSet;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer as PngBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::buffer::{DistanceMap, ImageBuffer, LabelMap, Plane};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Stored value per meter in 16-bit distance files.
pub const DISTANCE_SCALE: f64 = 256.0;
/// Largest distance representable in a 16-bit file.
pub const MAX_STORED_DISTANCE: f64 = u16::MAX as f64 / DISTANCE_SCALE;

fn dims(w: u32, h: u32) -> (usize, usize) {
    (w as usize, h as usize)
}

/// Loads an 8-bit grayscale or RGB(A) PNG into `[0, 1]` intensities. Alpha
/// is dropped.
pub fn load_image<T: Real>(path: impl AsRef<Path>) -> Result<ImageBuffer<T>> {
    let img = image::open(path)?;
    let to_unit = |v: u8| T::lit(v as f64 / 255.0);
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = dims(g.width(), g.height());
            ImageBuffer::new(w, h, 1, g.into_raw().into_iter().map(to_unit).collect())
        }
        DynamicImage::ImageLumaA8(_) => {
            let g = img.to_luma8();
            let (w, h) = dims(g.width(), g.height());
            ImageBuffer::new(w, h, 1, g.into_raw().into_iter().map(to_unit).collect())
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            let c = img.to_rgb8();
            let (w, h) = dims(c.width(), c.height());
            ImageBuffer::new(w, h, 3, c.into_raw().into_iter().map(to_unit).collect())
        }
        other => Err(Error::Format(format!("expected an 8-bit image, got {:?}", other.color()))),
    }
}

fn quantize<T: Real>(v: T) -> u8 {
    (v.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes 1-channel images as grayscale and 3-channel images as RGB.
pub fn save_image<T: Real>(path: impl AsRef<Path>, img: &ImageBuffer<T>) -> Result<()> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    match img.channels() {
        1 => GrayImage::from_raw(w, h, bytes).expect("sized buffer").save(path)?,
        3 => RgbImage::from_raw(w, h, bytes).expect("sized buffer").save(path)?,
        c => return Err(Error::Format(format!("cannot store a {c}-channel image as PNG"))),
    }
    Ok(())
}

pub fn save_rgb8(path: impl AsRef<Path>, width: usize, height: usize, rgb: Vec<u8>) -> Result<()> {
    let img: PngBuffer<Rgb<u8>, _> = PngBuffer::from_raw(width as u32, height as u32, rgb)
        .ok_or_else(|| Error::size("rgb buffer does not match dimensions"))?;
    img.save(path)?;
    Ok(())
}

/// Encodes a distance map as `round(D * 256)`, with `0` for invalid pixels.
pub fn encode_distance<T: Real>(dist: &DistanceMap<T>) -> Result<Vec<u16>> {
    let mut out = Vec::with_capacity(dist.width() * dist.height());
    for y in 0..dist.height() {
        for x in 0..dist.width() {
            if !dist.is_valid(x, y) {
                out.push(0);
                continue;
            }
            let d = dist.get(x, y).as_f64();
            let q = (d * DISTANCE_SCALE).round();
            if q > u16::MAX as f64 {
                return Err(Error::OutOfRange {
                    what: format!("distance above {MAX_STORED_DISTANCE:.3} m cannot be stored"),
                    value: d,
                });
            }
            // distances below half a step would read back as invalid
            out.push((q as u16).max(1));
        }
    }
    Ok(out)
}

pub fn decode_distance<T: Real>(width: usize, height: usize, raw: &[u16]) -> Result<DistanceMap<T>> {
    if raw.len() != width * height {
        return Err(Error::size("distance samples do not match dimensions"));
    }
    let values = raw
        .iter()
        .map(|&v| if v == 0 { T::one() } else { T::lit(v as f64 / DISTANCE_SCALE) })
        .collect();
    DistanceMap::with_validity(width, height, values, raw.iter().map(|&v| v != 0).collect())
}

pub fn save_distance_png<T: Real>(path: impl AsRef<Path>, dist: &DistanceMap<T>) -> Result<()> {
    let raw = encode_distance(dist)?;
    let img: PngBuffer<Luma<u16>, _> = PngBuffer::from_raw(dist.width() as u32, dist.height() as u32, raw).expect("sized buffer");
    img.save(path)?;
    Ok(())
}

pub fn load_distance_png<T: Real>(path: impl AsRef<Path>) -> Result<DistanceMap<T>> {
    match image::open(path)? {
        DynamicImage::ImageLuma16(g) => {
            let (w, h) = dims(g.width(), g.height());
            decode_distance(w, h, g.as_raw())
        }
        other => Err(Error::Format(format!("distance PNG must be 16-bit grayscale, got {:?}", other.color()))),
    }
}

/// Class names of a label map and the subset treated as dynamic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassTable {
    pub classes: Vec<String>,
    #[serde(default)]
    pub dynamic: Vec<String>,
}

impl ClassTable {
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() || self.classes.len() > 256 {
            return Err(Error::schema("classes", "between 1 and 256 classes are required"));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].contains(c) {
                return Err(Error::schema(format!("classes[{i}]"), format!("duplicate class \"{c}\"")));
            }
        }
        for (i, d) in self.dynamic.iter().enumerate() {
            if !self.classes.contains(d) {
                return Err(Error::schema(format!("dynamic[{i}]"), format!("\"{d}\" is not a listed class")));
            }
        }
        Ok(())
    }

    /// Indices of the dynamic classes.
    pub fn dynamic_set(&self) -> BTreeSet<u8> {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| self.dynamic.contains(c))
            .map(|(i, _)| i as u8)
            .collect()
    }
}

pub fn parse_class_table(text: &str) -> Result<ClassTable> {
    let t: ClassTable = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    t.validate()?;
    Ok(t)
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    path.with_extension("classes.toml")
}

/// Writes the label PNG and a `<stem>.classes.toml` sidecar next to it.
pub fn save_labels(path: impl AsRef<Path>, labels: &LabelMap, table: &ClassTable) -> Result<()> {
    let path = path.as_ref();
    table.validate()?;
    check_labels(labels, table)?;
    GrayImage::from_raw(labels.width() as u32, labels.height() as u32, labels.data().to_vec())
        .expect("sized buffer")
        .save(path)?;
    std::fs::write(sidecar(path), toml::to_string(table).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(())
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<(LabelMap, ClassTable)> {
    let path = path.as_ref();
    let table = parse_class_table(&std::fs::read_to_string(sidecar(path))?)?;
    let labels = match image::open(path)? {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = dims(g.width(), g.height());
            Plane::new(w, h, g.into_raw())?
        }
        other => return Err(Error::Format(format!("label PNG must be 8-bit grayscale, got {:?}", other.color()))),
    };
    check_labels(&labels, &table)?;
    Ok((labels, table))
}

fn check_labels(labels: &LabelMap, table: &ClassTable) -> Result<()> {
    match labels.data().iter().find(|&&l| l as usize >= table.classes.len()) {
        Some(&l) => Err(Error::OutOfRange {
            what: format!("label index with {} classes", table.classes.len()),
            value: l as f64,
        }),
        None => Ok(()),
    }
}
