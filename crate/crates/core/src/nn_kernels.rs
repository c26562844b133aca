//! Forward kernels for pixel-adaptive convolution and vector self-attention
//! (pairwise and patchwise), with naive loop references in [`reference`].

use rayon::prelude::*;

use crate::buffer::ImageBuffer;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Feature maps share the interleaved `H x W x C` layout of images.
pub type FeatureMap<T> = ImageBuffer<T>;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::size(format!("matrix {rows}x{cols} with {} values", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let data = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    /// `M v`, summing columns in ascending order.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(v).fold(T::zero(), |acc, (&m, &x)| acc + m * x))
            .collect()
    }
}

/// Pixel-adaptive convolution filter.
#[derive(Debug, Clone, PartialEq)]
pub struct PacFilter<T> {
    k: usize,
    c_in: usize,
    c_out: usize,
    /// `[c_out][c_in][k][k]`, the last two indexed by row then column offset.
    weights: Vec<T>,
    bias: Vec<T>,
    sigma: T,
}

impl<T: Real> PacFilter<T> {
    pub fn new(k: usize, c_in: usize, c_out: usize, weights: Vec<T>, bias: Vec<T>, sigma: T) -> Result<Self> {
        if k.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("kernel size {k} must be odd")));
        }
        if c_in == 0 || c_out == 0 {
            return Err(Error::InvalidParameter("filter needs at least one channel".into()));
        }
        if weights.len() != c_out * c_in * k * k || bias.len() != c_out {
            return Err(Error::size(format!(
                "filter {c_out}x{c_in}x{k}x{k} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("kernel bandwidth sigma = {sigma} must be positive")));
        }
        Ok(Self {
            k,
            c_in,
            c_out,
            weights,
            bias,
            sigma,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn c_in(&self) -> usize {
        self.c_in
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn weight(&self, o: usize, c: usize, dy: usize, dx: usize) -> T {
        self.weights[((o * self.c_in + c) * self.k + dy) * self.k + dx]
    }

    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        Self::new(self.k, self.c_in, self.c_out, self.weights.clone(), self.bias.clone(), sigma)
    }
}

/// Gaussian guidance kernel `exp(-0.5 |fa - fb|^2 / sigma^2)`.
pub fn guidance_kernel<T: Real>(fa: &[T], fb: &[T], sigma: T) -> T {
    let d2 = fa.iter().zip(fb).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    (-T::lit(0.5) * d2 / (sigma * sigma)).exp()
}

fn offset(i: usize, d: usize, r: usize, n: usize) -> Option<usize> {
    let p = (i + d).checked_sub(r)?;
    (p < n).then_some(p)
}

/// `x'_ij = sum_ab K(F_ij, F_ab) W[a-i, b-j] x_ab + B` with zero padding.
pub fn pixel_adaptive_conv<T: Real>(x: &FeatureMap<T>, guide: &FeatureMap<T>, f: &PacFilter<T>) -> Result<FeatureMap<T>> {
    let (w, h) = (x.width(), x.height());
    if guide.width() != w || guide.height() != h {
        return Err(Error::size("input and guidance feature maps differ in size"));
    }
    if x.channels() != f.c_in {
        return Err(Error::size(format!("input has {} channels, filter expects {}", x.channels(), f.c_in)));
    }
    let (k, r, c_out) = (f.k, f.k / 2, f.c_out);
    let rows: Vec<Vec<T>> = (0..h)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![T::zero(); w * c_out];
            for j in 0..w {
                let fij = guide.pixel(j, i);
                let out = &mut row[j * c_out..(j + 1) * c_out];
                for dy in 0..k {
                    let Some(a) = offset(i, dy, r, h) else { continue };
                    for dx in 0..k {
                        let Some(b) = offset(j, dx, r, w) else { continue };
                        let kern = guidance_kernel(fij, guide.pixel(b, a), f.sigma);
                        let xab = x.pixel(b, a);
                        for (o, acc) in out.iter_mut().enumerate() {
                            let conv = (0..f.c_in).fold(T::zero(), |s, c| s + f.weight(o, c, dy, dx) * xab[c]);
                            *acc = *acc + kern * conv;
                        }
                    }
                }
                for (acc, &b) in out.iter_mut().zip(&f.bias) {
                    *acc = *acc + b;
                }
            }
            row
        })
        .collect();
    FeatureMap::new(w, h, c_out, rows.concat())
}

/// Affine map followed by `exp` and, optionally, normalization over the
/// footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Zeta<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
    pub normalize: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<T> {
    radius: usize,
    phi: Matrix<T>,
    psi: Matrix<T>,
    chi: Matrix<T>,
    zeta: Zeta<T>,
}

/// Which relation feeds the weight mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttentionKind {
    /// Hadamard product `phi(x_ij) * psi(x_ab)`, one weight vector per pair.
    Pairwise,
    /// Concatenation of `phi(x_ij)` with `psi` of the whole footprint, one
    /// weight vector per footprint position.
    Patchwise,
}

impl<T: Real> AttentionParams<T> {
    /// Shapes: `phi, psi: d x c_in`, `chi: c_out x c_in`. The mapping `zeta`
    /// is `c_out x d` for pairwise attention and `P c_out x (d + P d)` for
    /// patchwise attention with `P = (2 radius + 1)^2` footprint positions
    /// (row `p c_out + o` weighs position `p`, channel `o`).
    pub fn new(kind: AttentionKind, radius: usize, phi: Matrix<T>, psi: Matrix<T>, chi: Matrix<T>, zeta: Zeta<T>) -> Result<Self> {
        let p = (2 * radius + 1) * (2 * radius + 1);
        let d = phi.rows;
        if psi.rows != d || psi.cols != phi.cols || chi.cols != phi.cols {
            return Err(Error::size("phi, psi and chi must share the input width and phi, psi the relation width"));
        }
        let (zr, zc) = match kind {
            AttentionKind::Pairwise => (chi.rows, d),
            AttentionKind::Patchwise => (p * chi.rows, d + p * d),
        };
        if zeta.weight.rows != zr || zeta.weight.cols != zc || zeta.bias.len() != zr {
            return Err(Error::size(format!(
                "weight mapping must be {zr}x{zc} with {zr} biases, got {}x{} with {}",
                zeta.weight.rows,
                zeta.weight.cols,
                zeta.bias.len()
            )));
        }
        Ok(Self {
            radius,
            phi,
            psi,
            chi,
            zeta,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn phi(&self) -> &Matrix<T> {
        &self.phi
    }

    pub fn psi(&self) -> &Matrix<T> {
        &self.psi
    }

    pub fn chi(&self) -> &Matrix<T> {
        &self.chi
    }

    pub fn zeta(&self) -> &Zeta<T> {
        &self.zeta
    }

    pub fn c_in(&self) -> usize {
        self.phi.cols
    }

    pub fn c_out(&self) -> usize {
        self.chi.rows
    }

    fn footprint(&self) -> usize {
        2 * self.radius + 1
    }
}

fn transform_all<T: Real>(x: &FeatureMap<T>, m: &Matrix<T>) -> Vec<Vec<T>> {
    (0..x.width() * x.height())
        .map(|i| m.apply(x.pixel(i % x.width(), i / x.width())))
        .collect()
}

/// Footprint-wise softmax of raw scores `s[p][o]` over the positions that
/// are present. Without normalization the scores are just exponentiated.
fn footprint_weights<T: Real>(scores: &mut [Option<Vec<T>>], c_out: usize, normalize: bool) {
    if !normalize {
        for s in scores.iter_mut().flatten() {
            s.iter_mut().for_each(|v| *v = v.exp());
        }
        return;
    }
    for o in 0..c_out {
        let max = scores.iter().flatten().fold(T::neg_infinity(), |m, s| m.max(s[o]));
        let mut sum = T::zero();
        for s in scores.iter_mut().flatten() {
            s[o] = (s[o] - max).exp();
            sum = sum + s[o];
        }
        for s in scores.iter_mut().flatten() {
            s[o] = s[o] / sum;
        }
    }
}

fn check_attention_input<T: Real>(x: &FeatureMap<T>, p: &AttentionParams<T>) -> Result<()> {
    if x.channels() != p.c_in() {
        return Err(Error::size(format!("input has {} channels, attention expects {}", x.channels(), p.c_in())));
    }
    Ok(())
}

/// Per-pixel weights over the footprint for one output position, indexed by
/// footprint position (row-major over offsets); `None` for positions outside
/// the image.
fn attention_weights<T: Real>(
    kind: AttentionKind,
    p: &AttentionParams<T>,
    phi: &[Vec<T>],
    psi: &[Vec<T>],
    (w, h): (usize, usize),
    (i, j): (usize, usize),
) -> Vec<Option<Vec<T>>> {
    let (n, r, c_out) = (p.footprint(), p.radius, p.c_out());
    let zeta = &p.zeta;
    let phi_ij = &phi[i * w + j];
    let pos = |q: usize| -> Option<usize> {
        let a = offset(i, q / n, r, h)?;
        let b = offset(j, q % n, r, w)?;
        Some(a * w + b)
    };
    let mut scores: Vec<Option<Vec<T>>> = match kind {
        AttentionKind::Pairwise => (0..n * n)
            .map(|q| {
                pos(q).map(|ab| {
                    let rel: Vec<T> = phi_ij.iter().zip(&psi[ab]).map(|(&a, &b)| a * b).collect();
                    zeta.weight.apply(&rel).into_iter().zip(&zeta.bias).map(|(v, &b)| v + b).collect()
                })
            })
            .collect(),
        AttentionKind::Patchwise => {
            let d = phi_ij.len();
            let mut rel = phi_ij.clone();
            for q in 0..n * n {
                match pos(q) {
                    Some(ab) => rel.extend_from_slice(&psi[ab]),
                    None => rel.extend(std::iter::repeat_n(T::zero(), d)),
                }
            }
            let all: Vec<T> = zeta.weight.apply(&rel).into_iter().zip(&zeta.bias).map(|(v, &b)| v + b).collect();
            (0..n * n)
                .map(|q| pos(q).map(|_| all[q * c_out..(q + 1) * c_out].to_vec()))
                .collect()
        }
    };
    footprint_weights(&mut scores, c_out, zeta.normalize);
    scores
}

fn attention<T: Real>(kind: AttentionKind, x: &FeatureMap<T>, p: &AttentionParams<T>) -> Result<FeatureMap<T>> {
    check_attention_input(x, p)?;
    let (w, h, c_out) = (x.width(), x.height(), p.c_out());
    let phi = transform_all(x, &p.phi);
    let psi = transform_all(x, &p.psi);
    let chi = transform_all(x, &p.chi);
    let (n, r) = (p.footprint(), p.radius);
    let rows: Vec<Vec<T>> = (0..h)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![T::zero(); w * c_out];
            for j in 0..w {
                let weights = attention_weights(kind, p, &phi, &psi, (w, h), (i, j));
                let out = &mut row[j * c_out..(j + 1) * c_out];
                for (q, eta) in weights.iter().enumerate() {
                    let Some(eta) = eta else { continue };
                    let (a, b) = (i + q / n - r, j + q % n - r);
                    for (o, acc) in out.iter_mut().enumerate() {
                        *acc = *acc + eta[o] * chi[a * w + b][o];
                    }
                }
            }
            row
        })
        .collect();
    FeatureMap::new(w, h, c_out, rows.concat())
}

/// `z_ij = sum_ab zeta(phi(x_ij) * psi(x_ab)) * chi(x_ab)` over the
/// in-bounds part of the `(2r+1)^2` footprint.
pub fn pairwise_attention<T: Real>(x: &FeatureMap<T>, p: &AttentionParams<T>) -> Result<FeatureMap<T>> {
    attention(AttentionKind::Pairwise, x, p)
}

/// `z_ij = sum_ab zeta([phi(x_ij), psi(x_footprint)])_ab * chi(x_ab)`; the
/// footprint is zero-padded in the relation and out-of-bounds positions get
/// no weight.
pub fn patchwise_attention<T: Real>(x: &FeatureMap<T>, p: &AttentionParams<T>) -> Result<FeatureMap<T>> {
    attention(AttentionKind::Patchwise, x, p)
}

/// Normalized footprint weights at one output pixel, for inspection.
pub fn weights_at<T: Real>(
    kind: AttentionKind,
    x: &FeatureMap<T>,
    p: &AttentionParams<T>,
    px: usize,
    py: usize,
) -> Result<Vec<Option<Vec<T>>>> {
    check_attention_input(x, p)?;
    if px >= x.width() || py >= x.height() {
        return Err(Error::OutOfRange {
            what: "pixel outside feature map".into(),
            value: (py * x.width() + px) as f64,
        });
    }
    let phi = transform_all(x, &p.phi);
    let psi = transform_all(x, &p.psi);
    Ok(attention_weights(kind, p, &phi, &psi, (x.width(), x.height()), (py, px)))
}

/// Straightforward nested-loop evaluations, used to cross-check the kernels
/// above. Accumulation order matches, so results agree to the last bit.
pub mod reference {
    use super::*;

    pub fn pixel_adaptive_conv<T: Real>(x: &FeatureMap<T>, guide: &FeatureMap<T>, f: &PacFilter<T>) -> FeatureMap<T> {
        let (w, h, k) = (x.width() as isize, x.height() as isize, f.k() as isize);
        let r = k / 2;
        let mut out = FeatureMap::zeros(x.width(), x.height(), f.c_out());
        for i in 0..h {
            for j in 0..w {
                for o in 0..f.c_out() {
                    let mut acc = T::zero();
                    for dy in 0..k {
                        for dx in 0..k {
                            let (a, b) = (i + dy - r, j + dx - r);
                            if a < 0 || b < 0 || a >= h || b >= w {
                                continue;
                            }
                            let (a, b) = (a as usize, b as usize);
                            let mut d2 = T::zero();
                            for c in 0..guide.channels() {
                                let diff = guide.get(j as usize, i as usize, c) - guide.get(b, a, c);
                                d2 = d2 + diff * diff;
                            }
                            let kern = (-T::lit(0.5) * d2 / (f.sigma() * f.sigma())).exp();
                            let mut conv = T::zero();
                            for c in 0..f.c_in() {
                                conv = conv + f.weight(o, c, dy as usize, dx as usize) * x.get(b, a, c);
                            }
                            acc = acc + kern * conv;
                        }
                    }
                    out.set(j as usize, i as usize, o, acc + f.bias()[o]);
                }
            }
        }
        out
    }

    fn matvec<T: Real>(m: &Matrix<T>, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); m.rows()];
        for (r, o) in out.iter_mut().enumerate() {
            for (c, &x) in v.iter().enumerate() {
                *o = *o + m.get(r, c) * x;
            }
        }
        out
    }

    pub fn attention<T: Real>(kind: AttentionKind, x: &FeatureMap<T>, p: &AttentionParams<T>) -> FeatureMap<T> {
        let (w, h) = (x.width() as isize, x.height() as isize);
        let r = p.radius() as isize;
        let n = 2 * r + 1;
        let c_out = p.c_out();
        let d = p.phi().rows();
        let zeta = p.zeta();
        let mut out = FeatureMap::zeros(x.width(), x.height(), c_out);
        for i in 0..h {
            for j in 0..w {
                let phi_ij = matvec(p.phi(), x.pixel(j as usize, i as usize));
                let inside = |dy: isize, dx: isize| {
                    let (a, b) = (i + dy - r, j + dx - r);
                    (a >= 0 && b >= 0 && a < h && b < w).then_some((a as usize, b as usize))
                };
                // raw scores per footprint position
                let mut scores: Vec<Option<Vec<T>>> = Vec::new();
                let mut patch_rel = phi_ij.clone();
                if kind == AttentionKind::Patchwise {
                    for dy in 0..n {
                        for dx in 0..n {
                            match inside(dy, dx) {
                                Some((a, b)) => patch_rel.extend(matvec(p.psi(), x.pixel(b, a))),
                                None => patch_rel.extend(vec![T::zero(); d]),
                            }
                        }
                    }
                }
                for dy in 0..n {
                    for dx in 0..n {
                        let q = (dy * n + dx) as usize;
                        scores.push(inside(dy, dx).map(|(a, b)| match kind {
                            AttentionKind::Pairwise => {
                                let psi_ab = matvec(p.psi(), x.pixel(b, a));
                                let rel: Vec<T> = (0..d).map(|t| phi_ij[t] * psi_ab[t]).collect();
                                let s = matvec(&zeta.weight, &rel);
                                (0..c_out).map(|o| s[o] + zeta.bias[o]).collect()
                            }
                            AttentionKind::Patchwise => {
                                let s = matvec(&zeta.weight, &patch_rel);
                                (0..c_out).map(|o| s[q * c_out + o] + zeta.bias[q * c_out + o]).collect()
                            }
                        }));
                    }
                }
                for o in 0..c_out {
                    if zeta.normalize {
                        let mut max = T::neg_infinity();
                        for s in scores.iter().flatten() {
                            max = max.max(s[o]);
                        }
                        let mut sum = T::zero();
                        for s in scores.iter_mut().flatten() {
                            s[o] = (s[o] - max).exp();
                            sum = sum + s[o];
                        }
                        for s in scores.iter_mut().flatten() {
                            s[o] = s[o] / sum;
                        }
                    } else {
                        for s in scores.iter_mut().flatten() {
                            s[o] = s[o].exp();
                        }
                    }
                }
                for o in 0..c_out {
                    let mut acc = T::zero();
                    for dy in 0..n {
                        for dx in 0..n {
                            let q = (dy * n + dx) as usize;
                            if let (Some(eta), Some((a, b))) = (&scores[q], inside(dy, dx)) {
                                let chi_ab = matvec(p.chi(), x.pixel(b, a));
                                acc = acc + eta[o] * chi_ab[o];
                            }
                        }
                    }
                    out.set(j as usize, i as usize, o, acc);
                }
            }
        }
        out
    }
}
