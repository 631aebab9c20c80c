//! Exact dynamic program for the depth-L ReLU CNTK with global average
//! pooling.
//!
//! Window sums use zero padding: a pixel offset that leaves the image
//! contributes nothing. Four-index tensors are stored dense in row-major
//! `(i, j, i', j')` order, which is only practical for small images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relu_ntk::{kappa0_unchecked, kappa1_unchecked};

/// A `d₁ × d₂ × c` image stored row-major as `(i, j, channel)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    d1: usize,
    d2: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(d1: usize, d2: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if d1 == 0 || d2 == 0 || channels == 0 {
            return Err(Error::param("image dimensions must be positive"));
        }
        if data.len() != d1 * d2 * channels {
            return Err(Error::Dimension {
                expected: d1 * d2 * channels,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("image entries must be finite"));
        }
        Ok(Self {
            d1,
            d2,
            channels,
            data,
        })
    }

    pub fn zeros(d1: usize, d2: usize, channels: usize) -> Result<Self> {
        Self::new(d1, d2, channels, vec![0.0; d1 * d2 * channels])
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d1, self.d2, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.d1 * self.d2
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[(i * self.d2 + j) * self.channels + l]
    }

    /// Channel vector `x_(i,j,:)`.
    pub fn pixel(&self, i: usize, j: usize) -> &[f64] {
        let start = (i * self.d2 + j) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn check_filter(q: usize) -> Result<()> {
    if q == 0 || q.is_multiple_of(2) {
        return Err(Error::param(format!("filter size must be odd, got {q}")));
    }
    Ok(())
}

/// Offsets `-(q-1)/2 ..= (q-1)/2` applied to `i`, keeping in-range results.
#[inline]
fn shifted(i: usize, offset: isize, len: usize) -> Option<usize> {
    let v = i as isize + offset;
    (v >= 0 && (v as usize) < len).then_some(v as usize)
}

fn offsets(q: usize) -> std::ops::RangeInclusive<isize> {
    let half = (q as isize - 1) / 2;
    -half..=half
}

fn window_sum_2d(map: &[f64], d1: usize, d2: usize, q: usize) -> Vec<f64> {
    let mut out = vec![0.0; d1 * d2];
    for i in 0..d1 {
        for j in 0..d2 {
            let mut acc = 0.0;
            for a in offsets(q) {
                let Some(ia) = shifted(i, a, d1) else { continue };
                for b in offsets(q) {
                    if let Some(jb) = shifted(j, b, d2) {
                        acc += map[ia * d2 + jb];
                    }
                }
            }
            out[i * d2 + j] = acc;
        }
    }
    out
}

/// `out[i,j,i',j'] = Σ_{a,b} t[i+a, j+b, i'+a, j'+b]`.
fn window_sum_4d(t: &[f64], d1: usize, d2: usize, q: usize) -> Vec<f64> {
    let p = d1 * d2;
    let mut out = vec![0.0; p * p];
    for i in 0..d1 {
        for j in 0..d2 {
            for i2 in 0..d1 {
                for j2 in 0..d2 {
                    let mut acc = 0.0;
                    for a in offsets(q) {
                        let (Some(ia), Some(i2a)) = (shifted(i, a, d1), shifted(i2, a, d1)) else {
                            continue;
                        };
                        for b in offsets(q) {
                            if let (Some(jb), Some(j2b)) = (shifted(j, b, d2), shifted(j2, b, d2)) {
                                acc += t[(ia * d2 + jb) * p + i2a * d2 + j2b];
                            }
                        }
                    }
                    out[(i * d2 + j) * p + i2 * d2 + j2] = acc;
                }
            }
        }
    }
    out
}

/// Patch energies `N^(h)` for `h = 0..=depth`, each a row-major `d₁ × d₂` map.
pub fn patch_norms(x: &ImageTensor, q: usize, depth: usize) -> Result<Vec<Vec<f64>>> {
    check_filter(q)?;
    let (d1, d2, _) = x.dims();
    let q2 = (q * q) as f64;
    let mut out = Vec::with_capacity(depth + 1);
    let base: Vec<f64> = (0..d1 * d2)
        .map(|p| q2 * x.pixel(p / d2, p % d2).iter().map(|v| v * v).sum::<f64>())
        .collect();
    out.push(base);
    for h in 1..=depth {
        let mut next = window_sum_2d(&out[h - 1], d1, d2, q);
        next.iter_mut().for_each(|v| *v /= q2);
        out.push(next);
    }
    Ok(out)
}

/// All intermediate tensors of the CNTK recursion for one image pair.
#[derive(Debug, Clone)]
pub struct CntkTrace {
    pub d1: usize,
    pub d2: usize,
    pub filter: usize,
    pub depth: usize,
    pub norms_y: Vec<Vec<f64>>,
    pub norms_z: Vec<Vec<f64>>,
    /// `Γ^(h)` for `h = 0..=L`.
    pub gamma: Vec<Vec<f64>>,
    /// `Γ̇^(h)` for `h = 0..=L`; entry 0 is all zeros.
    pub gamma_dot: Vec<Vec<f64>>,
    /// `Π^(h)` for `h = 0..=L`.
    pub pi: Vec<Vec<f64>>,
}

impl CntkTrace {
    pub fn index(&self, i: usize, j: usize, i2: usize, j2: usize) -> usize {
        (i * self.d2 + j) * self.d1 * self.d2 + i2 * self.d2 + j2
    }

    pub fn theta(&self) -> f64 {
        let p = (self.d1 * self.d2) as f64;
        self.pi[self.depth].iter().sum::<f64>() / (p * p)
    }
}

/// Arguments within rounding distance of ±1 are taken as ±1: `κ0` has an
/// infinite slope there, and the diagonal `A` of a self-pair is exactly 1
/// but lands a few ulps away after the window sums.
fn snap_unit(a: f64) -> f64 {
    const SNAP: f64 = 64.0 * f64::EPSILON;
    if (a.abs() - 1.0).abs() <= SNAP {
        a.signum()
    } else {
        a
    }
}

pub fn cntk_trace(y: &ImageTensor, z: &ImageTensor, q: usize, depth: usize) -> Result<CntkTrace> {
    check_filter(q)?;
    if depth == 0 {
        return Err(Error::param("CNTK depth must be at least 1"));
    }
    if y.dims() != z.dims() {
        let (a, b) = (y.data.len(), z.data.len());
        return Err(Error::Dimension { expected: a, got: b });
    }
    let (d1, d2, c) = y.dims();
    let p = d1 * d2;
    let q2 = (q * q) as f64;
    let norms_y = patch_norms(y, q, depth)?;
    let norms_z = patch_norms(z, q, depth)?;

    let mut gamma0 = vec![0.0; p * p];
    for a in 0..p {
        let ya = &y.data[a * c..(a + 1) * c];
        for b in 0..p {
            let zb = &z.data[b * c..(b + 1) * c];
            gamma0[a * p + b] = ya.iter().zip(zb).map(|(u, v)| u * v).sum();
        }
    }
    let mut gamma = vec![gamma0];
    let mut gamma_dot = vec![vec![0.0; p * p]];
    for h in 1..=depth {
        let summed = window_sum_4d(&gamma[h - 1], d1, d2, q);
        let mut g = vec![0.0; p * p];
        let mut gd = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                let nn = norms_y[h][a] * norms_z[h][b];
                let idx = a * p + b;
                // A zero normalizer takes the A -> 0 limit.
                let (root, arg) = if nn > 0.0 {
                    let root = nn.sqrt();
                    (root, snap_unit(summed[idx] / root))
                } else {
                    (0.0, 0.0)
                };
                g[idx] = root / q2 * kappa1_unchecked(arg);
                gd[idx] = kappa0_unchecked(arg) / q2;
            }
        }
        gamma.push(g);
        gamma_dot.push(gd);
    }

    let mut pi = vec![vec![0.0; p * p]];
    for h in 1..depth {
        let b: Vec<f64> = pi[h - 1]
            .iter()
            .zip(&gamma_dot[h])
            .zip(&gamma[h])
            .map(|((pv, gd), g)| pv * gd + g)
            .collect();
        pi.push(window_sum_4d(&b, d1, d2, q));
    }
    let last: Vec<f64> = pi[depth - 1]
        .iter()
        .zip(&gamma_dot[depth])
        .map(|(pv, gd)| pv * gd)
        .collect();
    pi.push(last);

    Ok(CntkTrace {
        d1,
        d2,
        filter: q,
        depth,
        norms_y,
        norms_z,
        gamma,
        gamma_dot,
        pi,
    })
}

/// Exact `Θ_cntk^(L)(y, z)` with global average pooling.
pub fn theta_cntk(y: &ImageTensor, z: &ImageTensor, q: usize, depth: usize) -> Result<f64> {
    Ok(cntk_trace(y, z, q, depth)?.theta())
}
