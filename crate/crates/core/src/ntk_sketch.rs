//! Randomized feature map for the depth-L ReLU NTK.
//!
//! Layer by layer the map tracks three sketched quantities:
//! `φ^(h)` whose inner products follow `Σ^(h)`, `φ̇^(h)` following `Σ̇^(h)`,
//! and `ψ^(h)` following `K^(h)`. The arc-cosine kernels are replaced by
//! their truncated Taylor polynomials and each polynomial kernel is sketched
//! with a PolySketch followed by an SRHT. A fitted-polynomial mode sketches
//! `K^(L)` directly in one step.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::poly_approx::{
    choose_degrees, fit_ntk_polynomial, taylor_coeffs_kappa0, taylor_coeffs_kappa1,
    PolynomialFit, DEFAULT_FIT_GRID,
};
use crate::polysketch::PolySketchTree;
use crate::rng::SeedStream;
use crate::sketch::{
    GaussianSketch, InputVector, SrhtSketch, DEFAULT_OSNAP_SPARSITY,
};

/// Largest polynomial degree the Taylor path is used for by default.
pub const DEFAULT_DEGREE_CAP: usize = 32;
/// Degree of the fitted polynomial when the Taylor degrees are too large.
pub const DEFAULT_FITTED_DEGREE: usize = 8;
/// Bounds applied to the order-of-magnitude default dimensions.
pub const DEFAULT_DIM_FLOOR: usize = 64;
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Intermediate sketch dimensions.
///
/// NTK: `Q¹: d→n`, `S: n→r`, `Q^{2p+2}: →m`, `T: →r`, `Q^{2p'+1}: →n1`,
/// `W: →s`, `Q²: →m2`, `R, V: →s`, `G: s→s*`.
/// CNTK uses `n` for the `Q^{2p'+1}` output and ignores `n1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchDims {
    pub s: usize,
    pub n: usize,
    pub n1: usize,
    pub r: usize,
    pub m: usize,
    pub m2: usize,
    pub s_star: usize,
}

impl SketchDims {
    pub fn uniform(dim: usize) -> Self {
        Self {
            s: dim,
            n: dim,
            n1: dim,
            r: dim,
            m: dim,
            m2: dim,
            s_star: dim,
        }
    }

    fn check(&self) -> Result<()> {
        let all = [
            ("s", self.s),
            ("n", self.n),
            ("n1", self.n1),
            ("r", self.r),
            ("m", self.m),
            ("m2", self.m2),
            ("s_star", self.s_star),
        ];
        for (name, v) in all {
            if v == 0 {
                return Err(Error::param(format!("sketch dimension {name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// Unit-constant versions of the asymptotic sizes, with `log_arg` the
    /// argument of the logarithms (`L/(εδ)` for the NTK and
    /// `d₁d₂L/(εδ)` for the CNTK). Each value is rounded up to a power of
    /// two and clamped to `[floor, cap]`.
    pub fn from_orders(depth: usize, eps: f64, delta: f64, log_arg: f64, floor: usize, cap: usize) -> Self {
        let l = depth.max(1) as f64;
        let lg = log_arg.max(std::f64::consts::E).ln();
        let fit = |v: f64| -> usize {
            let v = if v.is_finite() { v.ceil().max(1.0) } else { f64::MAX };
            let v = v.min(cap as f64) as usize;
            v.next_power_of_two().clamp(floor, cap)
        };
        Self {
            s: fit(l.powi(2) / eps.powi(2) * lg.powi(2)),
            n: fit(l.powi(6) / eps.powi(4) * lg.powi(3)),
            n1: fit(l.powi(4) / eps.powi(4) * lg.powi(3)),
            r: fit(l.powi(6) / eps.powi(4) * lg.powi(2)),
            m: fit(l.powi(8) / eps.powf(16.0 / 3.0) * lg.powi(3)),
            m2: fit(l.powi(2) / eps.powi(2) * lg.powi(3)),
            s_star: fit((1.0 / delta).ln() / eps.powi(2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SketchMode {
    /// Taylor polynomials of `κ1`, `κ0` composed layer by layer.
    Taylor,
    /// One nonnegative polynomial fitted to `K^(L)/(L+1)`.
    Fitted { degree: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub eps: f64,
    pub delta: f64,
    pub depth: usize,
    pub p: usize,
    pub p_prime: usize,
    pub dims: SketchDims,
    pub seed: u64,
    pub mode: SketchMode,
    #[serde(default = "default_osnap")]
    pub osnap_sparsity: usize,
    #[serde(default = "default_grid")]
    pub fit_grid: usize,
}

fn default_osnap() -> usize {
    DEFAULT_OSNAP_SPARSITY
}

fn default_grid() -> usize {
    DEFAULT_FIT_GRID
}

impl SketchConfig {
    /// Degrees from the accuracy rule, unit-constant dimensions, and the
    /// fitted path whenever a Taylor degree would exceed
    /// [`DEFAULT_DEGREE_CAP`].
    pub fn new(depth: usize, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        Self::with_degree_cap(depth, eps, delta, seed, DEFAULT_DEGREE_CAP)
    }

    pub fn with_degree_cap(depth: usize, eps: f64, delta: f64, seed: u64, cap: usize) -> Result<Self> {
        check_unit("delta", delta)?;
        let degrees = choose_degrees(depth, eps)?;
        let mode = if 2 * degrees.p + 2 > cap || 2 * degrees.p_prime + 1 > cap {
            SketchMode::Fitted {
                degree: DEFAULT_FITTED_DEGREE.min(cap.max(1)),
            }
        } else {
            SketchMode::Taylor
        };
        let log_arg = depth as f64 / (eps * delta);
        Ok(Self {
            eps,
            delta,
            depth,
            p: degrees.p,
            p_prime: degrees.p_prime,
            dims: SketchDims::from_orders(depth, eps, delta, log_arg, DEFAULT_DIM_FLOOR, DEFAULT_DIM_CAP),
            seed,
            mode,
            osnap_sparsity: DEFAULT_OSNAP_SPARSITY,
            fit_grid: DEFAULT_FIT_GRID,
        })
    }

    /// Explicit Taylor degrees; switches to the Taylor path.
    pub fn with_degrees(mut self, p: usize, p_prime: usize) -> Self {
        self.p = p;
        self.p_prime = p_prime;
        self.mode = SketchMode::Taylor;
        self
    }

    pub fn with_dims(mut self, dims: SketchDims) -> Self {
        self.dims = dims;
        self
    }

    pub fn with_mode(mut self, mode: SketchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_unit("eps", self.eps)?;
        check_unit("delta", self.delta)?;
        if self.depth == 0 {
            return Err(Error::param("depth must be at least 1"));
        }
        if self.osnap_sparsity == 0 {
            return Err(Error::param("OSNAP sparsity must be at least 1"));
        }
        if let SketchMode::Fitted { degree } = self.mode {
            if degree == 0 {
                return Err(Error::param("fitted polynomial degree must be at least 1"));
            }
        }
        self.dims.check()
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{name} must lie in (0, 1), got {v}")))
    }
}

pub(crate) fn sqrt_all(c: &[f64]) -> Vec<f64> {
    c.iter().map(|v| v.sqrt()).collect()
}

/// Stage ids for seed derivation.
mod component {
    pub const Q1: u64 = 1;
    pub const S: u64 = 2;
    pub const Q_COV: u64 = 3;
    pub const T: u64 = 4;
    pub const Q_DER: u64 = 5;
    pub const W: u64 = 6;
    pub const Q2: u64 = 7;
    pub const R: u64 = 8;
    pub const V: u64 = 9;
    pub const G: u64 = 10;
    pub const FIT_Q: u64 = 11;
    pub const FIT_T: u64 = 12;
    pub const FIT_G: u64 = 13;
}

#[derive(Debug, Clone)]
struct TaylorStages {
    q1: PolySketchTree,
    s: SrhtSketch,
    q_cov: PolySketchTree,
    t: SrhtSketch,
    q_der: PolySketchTree,
    w: SrhtSketch,
    q2: PolySketchTree,
    r: SrhtSketch,
    v: SrhtSketch,
    g: GaussianSketch,
    sqrt_c: Vec<f64>,
    sqrt_b: Vec<f64>,
}

#[derive(Debug, Clone)]
struct FittedStages {
    q: PolySketchTree,
    t: SrhtSketch,
    g: GaussianSketch,
    sqrt_a: Vec<f64>,
    fit: PolynomialFit,
}

#[derive(Debug, Clone)]
enum Stages {
    Taylor(TaylorStages),
    Fitted(FittedStages),
}

/// Frozen random state of one NTK feature map.
#[derive(Debug, Clone)]
pub struct NtkSketchState {
    config: SketchConfig,
    input_dim: usize,
    stages: Stages,
}

/// Per-layer intermediates of one Taylor-mode transform, before the final
/// Gaussian compression and rescaling by `‖x‖`.
#[derive(Debug, Clone)]
pub struct NtkLayerTrace {
    pub phi: Vec<Vec<f64>>,
    /// `φ̇^(h)` for `h = 1..=L`, stored at index `h - 1`.
    pub phi_dot: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
}

impl NtkSketchState {
    pub fn new(input_dim: usize, config: SketchConfig) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::param("input dimension must be at least 1"));
        }
        config.validate()?;
        let root = SeedStream::new(config.seed);
        let dims = config.dims;
        let stages = match config.mode {
            SketchMode::Taylor => {
                let cov_deg = 2 * config.p + 2;
                let der_deg = 2 * config.p_prime + 1;
                let tree = |deg, d, m, id, sparse| {
                    PolySketchTree::with_sparsity(deg, d, m, root.child(id), sparse, config.osnap_sparsity)
                };
                Stages::Taylor(TaylorStages {
                    q1: tree(1, input_dim, dims.n, component::Q1, true)?,
                    s: SrhtSketch::new(dims.n, dims.r, root.child(component::S))?,
                    q_cov: tree(cov_deg, dims.r, dims.m, component::Q_COV, false)?,
                    t: SrhtSketch::new((cov_deg + 1) * dims.m, dims.r, root.child(component::T))?,
                    q_der: tree(der_deg, dims.r, dims.n1, component::Q_DER, false)?,
                    w: SrhtSketch::new((der_deg + 1) * dims.n1, dims.s, root.child(component::W))?,
                    q2: tree(2, dims.s, dims.m2, component::Q2, false)?,
                    r: SrhtSketch::new(dims.m2 + dims.r, dims.s, root.child(component::R))?,
                    v: SrhtSketch::new(dims.r, dims.s, root.child(component::V))?,
                    g: GaussianSketch::new(dims.s_star, dims.s, root.child(component::G))?,
                    sqrt_c: sqrt_all(taylor_coeffs_kappa1(config.p).coefficients()),
                    sqrt_b: sqrt_all(taylor_coeffs_kappa0(config.p_prime).coefficients()),
                })
            }
            SketchMode::Fitted { degree } => {
                let fit = fit_ntk_polynomial(config.depth, degree, config.fit_grid)?;
                Stages::Fitted(FittedStages {
                    q: PolySketchTree::with_sparsity(
                        degree,
                        input_dim,
                        dims.m,
                        root.child(component::FIT_Q),
                        true,
                        config.osnap_sparsity,
                    )?,
                    t: SrhtSketch::new((degree + 1) * dims.m, dims.r, root.child(component::FIT_T))?,
                    g: GaussianSketch::new(dims.s_star, dims.r, root.child(component::FIT_G))?,
                    sqrt_a: sqrt_all(fit.polynomial.coefficients()),
                    fit,
                })
            }
        };
        Ok(Self {
            config,
            input_dim,
            stages,
        })
    }

    pub fn config(&self) -> &SketchConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.dims.s_star
    }

    /// The fitted polynomial, in fitted mode.
    pub fn fit(&self) -> Option<&PolynomialFit> {
        match &self.stages {
            Stages::Fitted(f) => Some(&f.fit),
            Stages::Taylor(_) => None,
        }
    }

    pub fn gaussian(&self) -> &GaussianSketch {
        match &self.stages {
            Stages::Taylor(t) => &t.g,
            Stages::Fitted(f) => &f.g,
        }
    }

    /// `Ψ(x) ∈ R^{s*}` with `⟨Ψ(y), Ψ(z)⟩ ≈ Θ_ntk^(L)(y, z)`.
    pub fn transform<'a>(&self, x: impl Into<InputVector<'a>>) -> Result<Vec<f64>> {
        let x = x.into();
        let norm = self.check_input(x)?;
        match &self.stages {
            Stages::Taylor(st) => {
                let trace = self.layers(st, x, norm)?;
                let psi = trace.psi.last().expect("depth >= 1");
                Ok(scale(st.g.apply(psi)?, norm))
            }
            Stages::Fitted(st) => {
                let unit = scaled_input(x, 1.0 / norm);
                let poly = st.q.apply_polynomial(&unit, &st.sqrt_a)?;
                let feat = st.g.apply(&st.t.apply(&poly)?)?;
                let c = norm * (self.config.depth as f64 + 1.0).sqrt();
                Ok(scale(feat, c))
            }
        }
    }

    /// Layer intermediates of the Taylor path, for diagnostics.
    pub fn layer_trace<'a>(&self, x: impl Into<InputVector<'a>>) -> Result<NtkLayerTrace> {
        let x = x.into();
        let norm = self.check_input(x)?;
        match &self.stages {
            Stages::Taylor(st) => self.layers(st, x, norm),
            Stages::Fitted(_) => Err(Error::param("layer traces exist only in Taylor mode")),
        }
    }

    fn check_input(&self, x: InputVector<'_>) -> Result<f64> {
        check_dim(self.input_dim, x.dim())?;
        let norm = x.norm();
        if norm == 0.0 {
            return Err(Error::ZeroInput);
        }
        Ok(norm)
    }

    fn layers(&self, st: &TaylorStages, x: InputVector<'_>, norm: f64) -> Result<NtkLayerTrace> {
        let depth = self.config.depth;
        let phi0 = scale(st.s.apply(&st.q1.apply_power(x)?)?, 1.0 / norm);
        let mut psi = vec![st.v.apply(&phi0)?];
        let mut phi = vec![phi0];
        let mut phi_dot = Vec::with_capacity(depth);
        for h in 1..=depth {
            let prev = &phi[h - 1];
            let next = st.t.apply(&st.q_cov.apply_polynomial(prev, &st.sqrt_c)?)?;
            let dot = st.w.apply(&st.q_der.apply_polynomial(prev, &st.sqrt_b)?)?;
            let mut joined = st.q2.apply_tensor_product(&[&psi[h - 1], &dot])?;
            joined.extend_from_slice(&next);
            psi.push(st.r.apply(&joined)?);
            phi.push(next);
            phi_dot.push(dot);
        }
        Ok(NtkLayerTrace { phi, phi_dot, psi })
    }
}

fn scale(mut v: Vec<f64>, c: f64) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x *= c);
    v
}

enum Owned {
    Dense(Vec<f64>),
    Sparse(crate::sketch::SparseVector),
}

impl<'a> From<&'a Owned> for InputVector<'a> {
    fn from(o: &'a Owned) -> Self {
        match o {
            Owned::Dense(v) => InputVector::Dense(v),
            Owned::Sparse(s) => InputVector::Sparse(s),
        }
    }
}

fn scaled_input(x: InputVector<'_>, c: f64) -> Owned {
    match x {
        InputVector::Dense(v) => Owned::Dense(v.iter().map(|a| a * c).collect()),
        InputVector::Sparse(s) => Owned::Sparse(s.scaled(c)),
    }
}
