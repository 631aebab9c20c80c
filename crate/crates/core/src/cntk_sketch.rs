//! Randomized feature map for the depth-L ReLU CNTK with global average
//! pooling.
//!
//! Every pixel carries its own `φ`, `φ̇` and `ψ` vectors, but all pixels share
//! one set of sketch instances. A q×q patch of neighbouring vectors is
//! concatenated (zero blocks outside the image) before each polynomial
//! sketch, which plays the role of the convolution.

use rayon::prelude::*;

use crate::cntk_oracle::{check_filter, patch_norms, ImageTensor};
use crate::error::{Error, Result};
use crate::ntk_sketch::{sqrt_all, SketchConfig, SketchDims, SketchMode, DEFAULT_DIM_CAP, DEFAULT_DIM_FLOOR};
use crate::poly_approx::{taylor_coeffs_kappa0, taylor_coeffs_kappa1};
use crate::polysketch::PolySketchTree;
use crate::rng::SeedStream;
use crate::sketch::{GaussianSketch, SrhtSketch};

mod component {
    pub const S: u64 = 1;
    pub const Q_COV: u64 = 2;
    pub const T: u64 = 3;
    pub const Q_DER: u64 = 4;
    pub const W: u64 = 5;
    pub const Q2: u64 = 6;
    pub const R: u64 = 7;
    pub const G: u64 = 8;
}

impl SketchConfig {
    /// Defaults for the convolutional map on `d₁ × d₂` images. The
    /// logarithms pick up the pixel count and both Taylor degrees are capped
    /// at `degree_cap` (the CNTK map has no fitted path).
    pub fn for_cntk(depth: usize, eps: f64, delta: f64, seed: u64, d1: usize, d2: usize, degree_cap: usize) -> Result<Self> {
        let mut cfg = SketchConfig::with_degree_cap(depth, eps, delta, seed, usize::MAX)?;
        let log_arg = (d1 * d2) as f64 * depth as f64 / (eps * delta);
        cfg.dims = SketchDims::from_orders(depth, eps, delta, log_arg, DEFAULT_DIM_FLOOR, DEFAULT_DIM_CAP);
        let cap = degree_cap.max(3);
        cfg.p = cfg.p.min((cap - 2) / 2);
        cfg.p_prime = cfg.p_prime.min((cap - 1) / 2);
        cfg.mode = SketchMode::Taylor;
        Ok(cfg)
    }
}

/// Frozen random state of one CNTK feature map.
#[derive(Debug, Clone)]
pub struct CntkSketchState {
    config: SketchConfig,
    d1: usize,
    d2: usize,
    channels: usize,
    filter: usize,
    s: SrhtSketch,
    q_cov: PolySketchTree,
    t: SrhtSketch,
    q_der: PolySketchTree,
    w: SrhtSketch,
    q2: PolySketchTree,
    r: SrhtSketch,
    g: GaussianSketch,
    sqrt_c: Vec<f64>,
    sqrt_b: Vec<f64>,
}

/// Per-pixel vectors of one transform, each layer stored pixel-major.
///
/// `phi[h][p]` for `h = 0..=L`; `phi_dot[h-1][p]` and `psi[h][p]` for
/// `h = 1..=L` and `h = 0..=L`. `psi[L]` lives in the `Q²` range.
#[derive(Debug, Clone)]
pub struct CntkLayerTrace {
    pub phi: Vec<Vec<Vec<f64>>>,
    pub phi_dot: Vec<Vec<Vec<f64>>>,
    pub psi: Vec<Vec<Vec<f64>>>,
    pub norms: Vec<Vec<f64>>,
}

impl CntkSketchState {
    pub fn new(d1: usize, d2: usize, channels: usize, filter: usize, config: SketchConfig) -> Result<Self> {
        check_filter(filter)?;
        if d1 == 0 || d2 == 0 || channels == 0 {
            return Err(Error::param("image dimensions must be positive"));
        }
        config.validate()?;
        if config.mode != SketchMode::Taylor {
            return Err(Error::param("the CNTK map supports only the Taylor mode"));
        }
        let root = SeedStream::new(config.seed);
        let dims = config.dims;
        let q2 = filter * filter;
        let cov_deg = 2 * config.p + 2;
        let der_deg = 2 * config.p_prime + 1;
        let patch_dim = q2 * dims.r;
        let tree = |deg: usize, d: usize, m: usize, id: u64| {
            PolySketchTree::with_sparsity(deg, d, m, root.child(id), d > m, config.osnap_sparsity)
        };
        Ok(Self {
            d1,
            d2,
            channels,
            filter,
            s: SrhtSketch::new(channels, dims.r, root.child(component::S))?,
            q_cov: tree(cov_deg, patch_dim, dims.m, component::Q_COV)?,
            t: SrhtSketch::new((cov_deg + 1) * dims.m, dims.r, root.child(component::T))?,
            q_der: tree(der_deg, patch_dim, dims.n, component::Q_DER)?,
            w: SrhtSketch::new((der_deg + 1) * dims.n, dims.s, root.child(component::W))?,
            q2: tree(2, dims.s, dims.m2, component::Q2)?,
            r: SrhtSketch::new(q2 * (dims.m2 + dims.r), dims.s, root.child(component::R))?,
            g: GaussianSketch::new(dims.s_star, dims.m2, root.child(component::G))?,
            sqrt_c: sqrt_all(taylor_coeffs_kappa1(config.p).coefficients()),
            sqrt_b: sqrt_all(taylor_coeffs_kappa0(config.p_prime).coefficients()),
            config,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    /// `(d₁, d₂, c)`.
    pub fn image_dims(&self) -> (usize, usize, usize) {
        (self.d1, self.d2, self.channels)
    }

    pub fn filter(&self) -> usize {
        self.filter
    }

    pub fn output_dim(&self) -> usize {
        self.config.dims.s_star
    }

    /// Input dimension of the `R` stage: `q²(m₂ + r)`.
    pub fn r_input_dim(&self) -> usize {
        self.r.input_dim()
    }

    pub fn gaussian(&self) -> &GaussianSketch {
        &self.g
    }

    /// Patch energies `N^(h)`, `h = 0..=L`, consumed by the transform.
    pub fn patch_norms(&self, x: &ImageTensor) -> Result<Vec<Vec<f64>>> {
        self.check_image(x)?;
        patch_norms(x, self.filter, self.config.depth)
    }

    /// `Ψ(x) ∈ R^{s*}` with `⟨Ψ(y), Ψ(z)⟩ ≈ Θ_cntk^(L)(y, z)`.
    pub fn transform(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        let trace = self.run(x, false)?;
        let last = trace.psi.last().expect("depth >= 1");
        let pooled = global_average_pool(last, self.config.dims.m2, self.d1 * self.d2);
        self.g.apply(&pooled)
    }

    /// All per-pixel intermediates, including `φ^(L)` and `φ̇^(1)` which the
    /// plain transform skips.
    pub fn layer_trace(&self, x: &ImageTensor) -> Result<CntkLayerTrace> {
        self.run(x, true)
    }

    fn check_image(&self, x: &ImageTensor) -> Result<()> {
        let got = x.dims();
        if got != (self.d1, self.d2, self.channels) {
            return Err(Error::Dimension {
                expected: self.d1 * self.d2 * self.channels,
                got: got.0 * got.1 * got.2,
            });
        }
        Ok(())
    }

    fn run(&self, x: &ImageTensor, full: bool) -> Result<CntkLayerTrace> {
        self.check_image(x)?;
        let depth = self.config.depth;
        let norms = patch_norms(x, self.filter, depth)?;
        let pixels = self.d1 * self.d2;
        let q = self.filter as f64;
        let dims = self.config.dims;

        let phi0: Vec<Vec<f64>> = (0..pixels)
            .into_par_iter()
            .map(|p| self.s.apply(x.pixel(p / self.d2, p % self.d2)))
            .collect::<Result<_>>()?;
        let mut phi = vec![phi0];
        let mut phi_dot = Vec::with_capacity(depth);
        let mut psi = vec![vec![vec![0.0; dims.s]; pixels]];

        for h in 1..=depth {
            let last = h == depth;
            let need_phi = full || !last;
            let need_dot = full || h > 1;
            let n_h = &norms[h];
            let prev_phi = &phi[h - 1];
            let layer: Vec<(Vec<f64>, Vec<f64>)> = (0..pixels)
                .into_par_iter()
                .map(|p| -> Result<(Vec<f64>, Vec<f64>)> {
                    let energy = n_h[p];
                    let mut mu = self.patch(prev_phi, p, dims.r);
                    if energy > 0.0 {
                        let inv = 1.0 / energy.sqrt();
                        mu.iter_mut().for_each(|v| *v *= inv);
                    } else {
                        mu.iter_mut().for_each(|v| *v = 0.0);
                    }
                    let next = if need_phi && energy > 0.0 {
                        let c = energy.sqrt() / q;
                        let mut v = self.t.apply(&self.q_cov.apply_polynomial(&mu, &self.sqrt_c)?)?;
                        v.iter_mut().for_each(|a| *a *= c);
                        v
                    } else {
                        vec![0.0; dims.r]
                    };
                    let dot = if need_dot {
                        let mut v = self.w.apply(&self.q_der.apply_polynomial(&mu, &self.sqrt_b)?)?;
                        v.iter_mut().for_each(|a| *a /= q);
                        v
                    } else {
                        vec![0.0; dims.s]
                    };
                    Ok((next, dot))
                })
                .collect::<Result<_>>()?;
            let (next_phi, dots): (Vec<_>, Vec<_>) = layer.into_iter().unzip();

            let prev_psi = &psi[h - 1];
            let first = h == 1;
            // Q²(ψ^(h-1) ⊗ φ̇^(h)) vanishes identically at h = 1.
            let products: Vec<Vec<f64>> = (0..pixels)
                .into_par_iter()
                .map(|p| {
                    if first {
                        Ok(vec![0.0; dims.m2])
                    } else {
                        self.q2.apply_tensor_product(&[&prev_psi[p], &dots[p]])
                    }
                })
                .collect::<Result<_>>()?;
            let next_psi = if last {
                products
            } else {
                let eta: Vec<Vec<f64>> = products
                    .into_iter()
                    .zip(&next_phi)
                    .map(|(mut a, b)| {
                        a.extend_from_slice(b);
                        a
                    })
                    .collect();
                (0..pixels)
                    .into_par_iter()
                    .map(|p| self.r.apply(&self.patch(&eta, p, dims.m2 + dims.r)))
                    .collect::<Result<_>>()?
            };
            phi.push(next_phi);
            phi_dot.push(dots);
            psi.push(next_psi);
        }
        Ok(CntkLayerTrace {
            phi,
            phi_dot,
            psi,
            norms,
        })
    }

    /// Row-major `(a, b)` concatenation of the q×q neighbourhood of pixel
    /// `p`, zero blocks outside the image.
    fn patch(&self, per_pixel: &[Vec<f64>], p: usize, block: usize) -> Vec<f64> {
        let half = (self.filter / 2) as isize;
        let (i, j) = ((p / self.d2) as isize, (p % self.d2) as isize);
        let mut out = vec![0.0; self.filter * self.filter * block];
        let mut chunks = out.chunks_exact_mut(block);
        for a in -half..=half {
            for b in -half..=half {
                let dst = chunks.next().expect("q² blocks");
                let (ii, jj) = (i + a, j + b);
                if ii >= 0 && jj >= 0 && (ii as usize) < self.d1 && (jj as usize) < self.d2 {
                    dst.copy_from_slice(&per_pixel[ii as usize * self.d2 + jj as usize]);
                }
            }
        }
        out
    }
}

/// `(1/P)·Σ_p v_p` with each coordinate summed in ascending order of value,
/// so the result does not depend on the order of the pixels.
pub fn global_average_pool(per_pixel: &[Vec<f64>], dim: usize, pixels: usize) -> Vec<f64> {
    let mut column = Vec::with_capacity(per_pixel.len());
    (0..dim)
        .map(|k| {
            column.clear();
            column.extend(per_pixel.iter().map(|v| v[k]));
            column.sort_by(f64::total_cmp);
            column.iter().sum::<f64>() / pixels as f64
        })
        .collect()
}
