//! Polynomial surrogates for the arc-cosine kernels and the ReLU-NTK.
//!
//! The truncated Taylor series of `κ1` and `κ0` have nonnegative
//! coefficients, which is what lets the sketches weight tensor powers by
//! `sqrt(coefficient)`. The fitted variant keeps that property by solving a
//! nonnegative least-squares problem.

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relu_ntk::{k_relu, kappa0_unchecked, kappa1_unchecked};

/// Default number of Chebyshev-spaced points for fitting.
pub const DEFAULT_FIT_GRID: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolyTarget {
    Kappa1Taylor,
    Kappa0Taylor,
    /// Fit of `K_relu^(L)(α) / (L + 1)`.
    FittedNtk { depth: usize },
}

/// Function a polynomial is compared against in [`sup_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetFn {
    Kappa1,
    Kappa0,
    NormalizedNtk { depth: usize },
}

impl TargetFn {
    pub fn eval(&self, alpha: f64) -> f64 {
        match *self {
            TargetFn::Kappa1 => kappa1_unchecked(alpha),
            TargetFn::Kappa0 => kappa0_unchecked(alpha),
            TargetFn::NormalizedNtk { depth } => {
                k_relu(depth, alpha.clamp(-1.0, 1.0)).expect("clamped") / (depth as f64 + 1.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPolynomial {
    coefficients: Vec<f64>,
    target: PolyTarget,
}

impl KernelPolynomial {
    pub fn new(coefficients: Vec<f64>, target: PolyTarget) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::param("polynomial needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::param("polynomial coefficients must be finite and nonnegative"));
        }
        Ok(Self {
            coefficients,
            target,
        })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn target(&self) -> PolyTarget {
        self.target
    }

    /// Horner evaluation; valid for any real argument.
    pub fn eval(&self, alpha: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * alpha + c)
    }
}

/// `(2i)! / (4^i (i!)^2)` for `i = 0..=n`, by `r_i = r_{i-1} (2i-1)/(2i)`.
fn central_ratios(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).scan(1.0_f64, |r, i| {
        if i > 0 {
            *r *= (2 * i - 1) as f64 / (2 * i) as f64;
        }
        Some(*r)
    })
}

/// Taylor truncation of `κ1` with degree `2p + 2`.
pub fn taylor_coeffs_kappa1(p: usize) -> KernelPolynomial {
    let mut c = vec![0.0; 2 * p + 3];
    c[0] = 1.0 / PI;
    c[1] = 0.5;
    for (i, r) in central_ratios(p).enumerate() {
        let k = (2 * i + 1) as f64;
        c[2 * i + 2] = r / (PI * k * (k + 1.0));
    }
    KernelPolynomial {
        coefficients: c,
        target: PolyTarget::Kappa1Taylor,
    }
}

/// Taylor truncation of `κ0` with degree `2p' + 1`.
pub fn taylor_coeffs_kappa0(p_prime: usize) -> KernelPolynomial {
    let mut b = vec![0.0; 2 * p_prime + 2];
    b[0] = 0.5;
    for (i, r) in central_ratios(p_prime).enumerate() {
        b[2 * i + 1] = r / (PI * (2 * i + 1) as f64);
    }
    KernelPolynomial {
        coefficients: b,
        target: PolyTarget::Kappa0Taylor,
    }
}

/// Degrees for a depth-L sketch at accuracy ε, with the guaranteed
/// sup-norm truncation errors at those degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeChoice {
    pub p: usize,
    pub p_prime: usize,
    pub kappa1_error_bound: f64,
    pub kappa0_error_bound: f64,
}

const TAIL_CONSTANT: f64 = E / (std::f64::consts::SQRT_2 * PI * PI);

/// Upper bound on `sup |P^(p) − κ1|` over `[-1, 1]`.
pub fn kappa1_truncation_bound(p: usize) -> f64 {
    TAIL_CONSTANT / (6.0 * (p as f64).powf(1.5))
}

/// Upper bound on `sup |Ṗ^(p') − κ0|` over `[-1, 1]`.
pub fn kappa0_truncation_bound(p_prime: usize) -> f64 {
    TAIL_CONSTANT / (p_prime as f64).sqrt()
}

/// Smallest `p` whose κ1 truncation error is guaranteed below `eps`.
pub fn kappa1_degree_for(eps: f64) -> usize {
    (1.0 / (9.0 * eps.powf(2.0 / 3.0))).ceil() as usize
}

/// Smallest `p'` whose κ0 truncation error is guaranteed below `eps`.
pub fn kappa0_degree_for(eps: f64) -> usize {
    (1.0 / (26.0 * eps * eps)).ceil() as usize
}

pub fn choose_degrees(depth: usize, eps: f64) -> Result<DegreeChoice> {
    if depth == 0 {
        return Err(Error::param("depth must be at least 1"));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::param(format!("epsilon must lie in (0, 1], got {eps}")));
    }
    let l2 = (depth * depth) as f64;
    let p = (2.0 * l2 / eps.powf(4.0 / 3.0)).ceil() as usize;
    let p_prime = (9.0 * l2 / (eps * eps)).ceil() as usize;
    Ok(DegreeChoice {
        p,
        p_prime,
        kappa1_error_bound: kappa1_truncation_bound(p),
        kappa0_error_bound: kappa0_truncation_bound(p_prime),
    })
}

/// Max of `|poly(α) − target(α)|` over `grid_size` uniform points of `[-1, 1]`.
pub fn sup_error(poly: &KernelPolynomial, target: TargetFn, grid_size: usize) -> f64 {
    uniform_grid(grid_size)
        .map(|a| (poly.eval(a) - target.eval(a)).abs())
        .fold(0.0, f64::max)
}

pub fn uniform_grid(n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |k| -1.0 + 2.0 * k as f64 / (n - 1) as f64)
}

/// Chebyshev–Lobatto points `cos(πk/(n-1))`, denser near ±1.
pub fn chebyshev_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| (PI * k as f64 / (n - 1) as f64).cos())
        .rev()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub polynomial: KernelPolynomial,
    /// Max absolute residual on the fitting grid.
    pub sup_residual: f64,
}

/// Nonnegative least-squares fit of `K_relu^(L)(α)/(L+1)` by a polynomial
/// of the given degree on a Chebyshev grid.
pub fn fit_ntk_polynomial(depth: usize, degree: usize, grid_size: usize) -> Result<PolynomialFit> {
    let target = TargetFn::NormalizedNtk { depth };
    let grid = chebyshev_grid(grid_size);
    let values: Vec<f64> = grid.iter().map(|&a| target.eval(a)).collect();
    let coefficients = fit_nonnegative(&grid, &values, degree)?;
    let polynomial = KernelPolynomial::new(coefficients, PolyTarget::FittedNtk { depth })?;
    let sup_residual = grid
        .iter()
        .zip(&values)
        .map(|(&a, &v)| (polynomial.eval(a) - v).abs())
        .fold(0.0, f64::max);
    Ok(PolynomialFit {
        polynomial,
        sup_residual,
    })
}

/// Monomial least squares with coefficients constrained to be `>= 0`.
pub fn fit_nonnegative(points: &[f64], values: &[f64], degree: usize) -> Result<Vec<f64>> {
    if points.len() != values.len() || points.is_empty() {
        return Err(Error::param("fit needs matching, nonempty point and value lists"));
    }
    let a = DMatrix::from_fn(points.len(), degree + 1, |i, j| points[i].powi(j as i32));
    let b = DVector::from_column_slice(values);
    let x = nnls(&a, &b)?;
    Ok(x.iter().map(|v| v.max(0.0)).collect())
}

/// Lawson–Hanson active-set solver for `min ‖Ax − b‖` subject to `x >= 0`.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = a.ncols();
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];

    let solve_passive = |passive: &[bool]| -> Result<DVector<f64>> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
        let z_sub = sub
            .svd(true, true)
            .solve(b, 1e-13)
            .map_err(|e| Error::Solve(e.to_string()))?;
        let mut z = DVector::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            z[j] = z_sub[k];
        }
        Ok(z)
    };

    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else { break };
        passive[t] = true;
        loop {
            let z = solve_passive(&passive)?;
            let infeasible: Vec<usize> = (0..n).filter(|&j| passive[j] && z[j] <= 0.0).collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let step = infeasible
                .iter()
                .map(|&j| x[j] / (x[j] - z[j]))
                .fold(f64::INFINITY, f64::min);
            x += (z - &x) * step;
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    Ok(x)
}
