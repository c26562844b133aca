//! Binary containers: float32 tensor blocks and height grids.
//!
//! A tensor block is
//!
//! ```text
//! magic   8 bytes  "FDTENSOR"
//! version u32 LE   1
//! width   u32 LE
//! height  u32 LE
//! chans   u32 LE
//! data    f32 LE   chans * height * width, planar (channel-major, then row-major)
//! ```
//!
//! Parameter files are several blocks back to back. A height grid file is
//!
//! ```text
//! magic   8 bytes  "FDHEIGHT"
//! version u32 LE   1
//! side    u32 LE
//! cell    f64 LE
//! range   f64 LE
//! height  f32 LE   side * side, row-major (iy, ix)
//! known   u8       side * side, 0 or 1
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::buffer::{DistanceMap, Plane};
use crate::error::{Error, Result};
use crate::geom_tensor::CameraGeometryTensor;
use crate::heightmap::HeightGrid;
use crate::nn_kernels::{AttentionKind, AttentionParams, Matrix, PacFilter, Zeta};
use crate::scalar::Real;

pub const TENSOR_MAGIC: &[u8; 8] = b"FDTENSOR";
pub const GRID_MAGIC: &[u8; 8] = b"FDHEIGHT";
pub const FORMAT_VERSION: u32 = 1;

/// One planar float32 block.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlock {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl TensorBlock {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::size(format!(
                "block {width}x{height}x{channels} got {} values",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_planes<T: Real>(planes: &[&Plane<T>]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::size("no planes to store"))?;
        if planes.iter().any(|p| !p.same_size(first)) {
            return Err(Error::size("planes differ in size"));
        }
        let data = planes
            .iter()
            .flat_map(|p| p.data().iter().map(|v| v.as_f64() as f32))
            .collect();
        Self::new(first.width(), first.height(), planes.len(), data)
    }

    pub fn plane<T: Real>(&self, c: usize) -> Plane<T> {
        let n = self.width * self.height;
        let data = self.data[c * n..(c + 1) * n].iter().map(|&v| T::lit(v as f64)).collect();
        Plane::new(self.width, self.height, data).expect("block-sized plane")
    }

    fn scalar(&self, what: &str) -> Result<f32> {
        match self.data.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Format(format!("{what} must be a single value"))),
        }
    }
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in 32 bits")))
}

pub fn write_block(w: &mut impl Write, b: &TensorBlock) -> Result<()> {
    w.write_all(TENSOR_MAGIC)?;
    for v in [FORMAT_VERSION, u32_field(b.width, "width")?, u32_field(b.height, "height")?, u32_field(b.channels, "channels")?] {
        w.write_all(&v.to_le_bytes())?;
    }
    let mut bytes = Vec::with_capacity(b.data.len() * 4);
    for v in &b.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn check_header(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic {:?}, expected {:?}", String::from_utf8_lossy(&m), String::from_utf8_lossy(magic))));
    }
    let version = read_u32(r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(())
}

pub fn read_block(r: &mut impl Read) -> Result<TensorBlock> {
    check_header(r, TENSOR_MAGIC)?;
    let (w, h, c) = (read_u32(r)? as usize, read_u32(r)? as usize, read_u32(r)? as usize);
    let n = w
        .checked_mul(h)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::Format("block dimensions overflow".into()))?;
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    TensorBlock::new(w, h, c, data)
}

/// Every block of a byte buffer, in order.
pub fn read_blocks(bytes: &[u8]) -> Result<Vec<TensorBlock>> {
    let mut cur = bytes;
    let mut out = Vec::new();
    while !cur.is_empty() {
        out.push(read_block(&mut cur)?);
    }
    Ok(out)
}

pub fn save_blocks(path: impl AsRef<Path>, blocks: &[TensorBlock]) -> Result<()> {
    let mut buf = Vec::new();
    for b in blocks {
        write_block(&mut buf, b)?;
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_blocks(path: impl AsRef<Path>) -> Result<Vec<TensorBlock>> {
    read_blocks(&std::fs::read(path)?)
}

fn expect_blocks(blocks: Vec<TensorBlock>, n: usize, what: &str) -> Result<Vec<TensorBlock>> {
    if blocks.len() != n {
        return Err(Error::Format(format!("{what} file holds {} blocks, expected {n}", blocks.len())));
    }
    Ok(blocks)
}

pub fn geometry_tensor_block<T: Real>(t: &CameraGeometryTensor<T>) -> TensorBlock {
    TensorBlock::from_planes(&t.channels()).expect("tensor channels share a size")
}

pub fn save_geometry_tensor<T: Real>(path: impl AsRef<Path>, t: &CameraGeometryTensor<T>) -> Result<()> {
    save_blocks(path, &[geometry_tensor_block(t)])
}

pub fn load_geometry_tensor<T: Real>(path: impl AsRef<Path>) -> Result<CameraGeometryTensor<T>> {
    let b = expect_blocks(load_blocks(path)?, 1, "geometry tensor")?.remove(0);
    if b.channels != 6 {
        return Err(Error::Format(format!("geometry tensor needs 6 channels, found {}", b.channels)));
    }
    CameraGeometryTensor::from_channels(std::array::from_fn(|c| b.plane(c)))
}

/// Raw float distance map; invalid pixels are stored as NaN.
pub fn save_distance_raw<T: Real>(path: impl AsRef<Path>, d: &DistanceMap<T>) -> Result<()> {
    let data = d
        .values()
        .data()
        .iter()
        .zip(d.validity())
        .map(|(&v, &ok)| if ok { v.as_f64() as f32 } else { f32::NAN })
        .collect();
    save_blocks(path, &[TensorBlock::new(d.width(), d.height(), 1, data)?])
}

pub fn load_distance_raw<T: Real>(path: impl AsRef<Path>) -> Result<DistanceMap<T>> {
    let b = expect_blocks(load_blocks(path)?, 1, "distance")?.remove(0);
    if b.channels != 1 {
        return Err(Error::Format("distance file must have one channel".into()));
    }
    let valid: Vec<bool> = b.data.iter().map(|v| !v.is_nan()).collect();
    let values = b.data.iter().map(|&v| if v.is_nan() { T::one() } else { T::lit(v as f64) }).collect();
    DistanceMap::with_validity(b.width, b.height, values, valid)
}

fn scalar_block(v: f64) -> TensorBlock {
    TensorBlock::new(1, 1, 1, vec![v as f32]).expect("scalar block")
}

fn vector_block<T: Real>(v: &[T]) -> Result<TensorBlock> {
    TensorBlock::new(v.len(), 1, 1, v.iter().map(|x| x.as_f64() as f32).collect())
}

fn matrix_block<T: Real>(m: &Matrix<T>) -> TensorBlock {
    TensorBlock::new(m.cols(), m.rows(), 1, m.data().iter().map(|x| x.as_f64() as f32).collect()).expect("matrix block")
}

fn block_matrix<T: Real>(b: &TensorBlock) -> Result<Matrix<T>> {
    if b.channels != 1 {
        return Err(Error::Format("matrix block must have one channel".into()));
    }
    Matrix::new(b.height, b.width, b.data.iter().map(|&v| T::lit(v as f64)).collect())
}

fn block_vector<T: Real>(b: &TensorBlock) -> Vec<T> {
    b.data.iter().map(|&v| T::lit(v as f64)).collect()
}

/// Filter weights as a `k x k` block with `c_out * c_in` channels, then the
/// bias vector, then `sigma`.
pub fn pac_blocks<T: Real>(f: &PacFilter<T>) -> Result<Vec<TensorBlock>> {
    Ok(vec![
        TensorBlock::new(f.k(), f.k(), f.c_out() * f.c_in(), f.weights().iter().map(|x| x.as_f64() as f32).collect())?,
        vector_block(f.bias())?,
        scalar_block(f.sigma().as_f64()),
    ])
}

pub fn pac_from_blocks<T: Real>(blocks: Vec<TensorBlock>) -> Result<PacFilter<T>> {
    let b = expect_blocks(blocks, 3, "pixel-adaptive filter")?;
    let c_out = b[1].data.len();
    if c_out == 0 || b[0].width != b[0].height || b[0].channels % c_out != 0 {
        return Err(Error::Format("inconsistent filter blocks".into()));
    }
    PacFilter::new(
        b[0].width,
        b[0].channels / c_out,
        c_out,
        block_vector(&b[0]),
        block_vector(&b[1]),
        T::lit(b[2].scalar("sigma")? as f64),
    )
}

/// Header `[kind, radius, normalize]`, then `phi`, `psi`, `chi`, the weight
/// mapping matrix and its bias.
pub fn attention_blocks<T: Real>(kind: AttentionKind, p: &AttentionParams<T>) -> Result<Vec<TensorBlock>> {
    let k = match kind {
        AttentionKind::Pairwise => 0.0,
        AttentionKind::Patchwise => 1.0,
    };
    let normalize = if p.zeta().normalize { 1.0 } else { 0.0 };
    Ok(vec![
        TensorBlock::new(3, 1, 1, vec![k, p.radius() as f32, normalize])?,
        matrix_block(p.phi()),
        matrix_block(p.psi()),
        matrix_block(p.chi()),
        matrix_block(&p.zeta().weight),
        vector_block(&p.zeta().bias)?,
    ])
}

pub fn attention_from_blocks<T: Real>(blocks: Vec<TensorBlock>) -> Result<(AttentionKind, AttentionParams<T>)> {
    let b = expect_blocks(blocks, 6, "attention")?;
    let head = &b[0].data;
    if head.len() != 3 {
        return Err(Error::Format("attention header must hold 3 values".into()));
    }
    let kind = match head[0] {
        0.0 => AttentionKind::Pairwise,
        1.0 => AttentionKind::Patchwise,
        v => return Err(Error::Format(format!("unknown attention kind {v}"))),
    };
    if head[1] < 0.0 || head[1].fract() != 0.0 {
        return Err(Error::Format(format!("invalid footprint radius {}", head[1])));
    }
    let zeta = Zeta {
        weight: block_matrix(&b[4])?,
        bias: block_vector(&b[5]),
        normalize: head[2] != 0.0,
    };
    let p = AttentionParams::new(kind, head[1] as usize, block_matrix(&b[1])?, block_matrix(&b[2])?, block_matrix(&b[3])?, zeta)?;
    Ok((kind, p))
}

pub fn write_grid<T: Real>(w: &mut impl Write, g: &HeightGrid<T>) -> Result<()> {
    w.write_all(GRID_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&u32_field(g.side(), "grid side")?.to_le_bytes())?;
    w.write_all(&g.cell_size().as_f64().to_le_bytes())?;
    w.write_all(&g.range().as_f64().to_le_bytes())?;
    let mut bytes = Vec::with_capacity(g.heights().len() * 5);
    for (&h, &n) in g.heights().iter().zip(g.counts()) {
        let v = if n > 0 { h.as_f64() as f32 } else { 0.0 };
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend(g.counts().iter().map(|&n| (n > 0) as u8));
    w.write_all(&bytes)?;
    Ok(())
}

/// Reads a grid; known cells come back with an observation count of 1.
pub fn read_grid<T: Real>(r: &mut impl Read) -> Result<HeightGrid<T>> {
    check_header(r, GRID_MAGIC)?;
    let side = read_u32(r)? as usize;
    let (cell, range) = (read_f64(r)?, read_f64(r)?);
    let n = side.checked_mul(side).ok_or_else(|| Error::Format("grid side overflows".into()))?;
    let mut hb = vec![0u8; n * 4];
    r.read_exact(&mut hb)?;
    let mut known = vec![0u8; n];
    r.read_exact(&mut known)?;
    let heights = hb.chunks_exact(4).map(|b| T::lit(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)).collect();
    let counts = known
        .iter()
        .map(|&k| match k {
            0 => Ok(0),
            1 => Ok(1),
            v => Err(Error::Format(format!("known flag {v} is not 0 or 1"))),
        })
        .collect::<Result<Vec<u32>>>()?;
    let g = HeightGrid::from_parts(T::lit(cell), T::lit(range), heights, counts)?;
    if g.side() != side {
        return Err(Error::Format(format!("grid side {side} does not match cell {cell} and range {range}")));
    }
    Ok(g)
}

pub fn save_grid<T: Real>(path: impl AsRef<Path>, g: &HeightGrid<T>) -> Result<()> {
    let mut buf = Vec::new();
    write_grid(&mut buf, g)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_grid<T: Real>(path: impl AsRef<Path>) -> Result<HeightGrid<T>> {
    let bytes = std::fs::read(path)?;
    let mut cur = bytes.as_slice();
    let g = read_grid(&mut cur)?;
    if !cur.is_empty() {
        return Err(Error::Format("trailing bytes after grid".into()));
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_round_trip() {
        let b = TensorBlock::new(3, 2, 2, (0..12).map(|i| i as f32 * 0.5 - 1.0).collect()).unwrap();
        let mut buf = Vec::new();
        write_block(&mut buf, &b).unwrap();
        write_block(&mut buf, &b).unwrap();
        assert_eq!(buf.len(), 2 * (24 + 48));
        assert_eq!(read_blocks(&buf).unwrap(), vec![b.clone(), b]);
    }

    #[test]
    fn version_mismatch() {
        let b = TensorBlock::new(1, 1, 1, vec![1.0]).unwrap();
        let mut buf = Vec::new();
        write_block(&mut buf, &b).unwrap();
        buf[8] = 2;
        assert!(matches!(read_blocks(&buf), Err(Error::Version { found: 2, expected: 1 })));
        buf[0] = b'X';
        assert!(matches!(read_blocks(&buf), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_block_is_an_error() {
        let b = TensorBlock::new(2, 2, 1, vec![1.0; 4]).unwrap();
        let mut buf = Vec::new();
        write_block(&mut buf, &b).unwrap();
        buf.pop();
        assert!(read_blocks(&buf).is_err());
    }

    #[test]
    fn grid_round_trip() {
        let g = crate::heightmap::project_to_grid(&[[0.3, 0.2, 1.25], [-0.7, 0.9, -0.5]], &HeightGrid::<f64>::new(0.25, 1.0).unwrap());
        let mut buf = Vec::new();
        write_grid(&mut buf, &g).unwrap();
        let back: HeightGrid<f64> = read_grid(&mut buf.as_slice()).unwrap();
        assert!(back.same_geometry(&g));
        assert_eq!(back.heights(), g.heights());
        assert_eq!(back.known_count(), 2);
    }
}
