//! Exact ReLU neural tangent kernel through arc-cosine kernel compositions.
//!
//! `Σ^(h)` is the h-fold composition of `κ1`, `Σ̇^(h) = κ0(Σ^(h-1))` and
//! `K^(h) = K^(h-1) Σ̇^(h) + Σ^(h)` with `K^(0)(α) = α`. For inputs `y, z`
//! the depth-L kernel is `‖y‖‖z‖ K^(L)(cos(y, z))`.

use std::f64::consts::PI;

use crate::error::{check_dim, Error, Result};

/// Slack allowed beyond `[-1, 1]` before an argument is rejected.
pub const DOMAIN_TOLERANCE: f64 = 1e-9;

fn clamp_unit(alpha: f64) -> Result<f64> {
    if !(-1.0 - DOMAIN_TOLERANCE..=1.0 + DOMAIN_TOLERANCE).contains(&alpha) {
        return Err(Error::Domain(alpha));
    }
    Ok(alpha.clamp(-1.0, 1.0))
}

/// Zeroth-order arc-cosine kernel `(π − arccos α)/π`.
pub fn kappa0(alpha: f64) -> Result<f64> {
    let a = clamp_unit(alpha)?;
    Ok((PI - a.acos()) / PI)
}

/// First-order arc-cosine kernel `(sqrt(1 − α²) + α(π − arccos α))/π`.
pub fn kappa1(alpha: f64) -> Result<f64> {
    let a = clamp_unit(alpha)?;
    Ok(((1.0 - a * a).max(0.0).sqrt() + a * (PI - a.acos())) / PI)
}

// Callers guarantee the argument lies in [-1, 1].
pub(crate) fn kappa0_unchecked(a: f64) -> f64 {
    (PI - a.clamp(-1.0, 1.0).acos()) / PI
}

pub(crate) fn kappa1_unchecked(a: f64) -> f64 {
    let a = a.clamp(-1.0, 1.0);
    ((1.0 - a * a).max(0.0).sqrt() + a * (PI - a.acos())) / PI
}

/// Per-layer values of the ReLU-NTK recursion at one argument.
#[derive(Debug, Clone, PartialEq)]
pub struct NtkScalarTrace {
    pub depth: usize,
    /// `Σ^(h)(α)` for `h = 0..=L`.
    pub sigma: Vec<f64>,
    /// `Σ̇^(h)(α)` for `h = 0..=L`; entry 0 is unused and set to 1.
    pub sigma_dot: Vec<f64>,
    /// `K^(h)(α)` for `h = 0..=L`.
    pub k: Vec<f64>,
}

impl NtkScalarTrace {
    pub fn value(&self) -> f64 {
        self.k[self.depth]
    }
}

pub fn k_relu_trace(depth: usize, alpha: f64) -> Result<NtkScalarTrace> {
    let a = clamp_unit(alpha)?;
    let mut sigma = Vec::with_capacity(depth + 1);
    let mut sigma_dot = Vec::with_capacity(depth + 1);
    let mut k = Vec::with_capacity(depth + 1);
    sigma.push(a);
    sigma_dot.push(1.0);
    k.push(a);
    for h in 1..=depth {
        let prev = sigma[h - 1];
        let s = kappa1_unchecked(prev);
        let sd = kappa0_unchecked(prev);
        k.push(k[h - 1] * sd + s);
        sigma.push(s);
        sigma_dot.push(sd);
    }
    Ok(NtkScalarTrace {
        depth,
        sigma,
        sigma_dot,
        k,
    })
}

/// `K_relu^(L)(α)`.
pub fn k_relu(depth: usize, alpha: f64) -> Result<f64> {
    let mut a = clamp_unit(alpha)?;
    let mut k = a;
    for _ in 0..depth {
        let sd = kappa0_unchecked(a);
        a = kappa1_unchecked(a);
        k = k * sd + a;
    }
    Ok(k)
}

/// Exact depth-L ReLU NTK `Θ(y, z)`.
pub fn theta_ntk(depth: usize, y: &[f64], z: &[f64]) -> Result<f64> {
    check_dim(y.len(), z.len())?;
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if ny == 0.0 || nz == 0.0 {
        return Err(Error::ZeroInput);
    }
    Ok(ny * nz * k_relu(depth, cosine(y, z, ny, nz))?)
}

/// `⟨y, z⟩/(‖y‖‖z‖)`. Near ±1 it is computed from `‖ŷ ∓ ẑ‖²`, which keeps
/// identical directions exact; `κ0` has an infinite slope at ±1, so a
/// one-ulp error in the cosine would otherwise cost ~1e-8 in the kernel.
pub(crate) fn cosine(y: &[f64], z: &[f64], ny: f64, nz: f64) -> f64 {
    let c = y.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / (ny * nz);
    let gap = |sign: f64| -> f64 {
        y.iter()
            .zip(z)
            .map(|(a, b)| {
                let d = a / ny - sign * b / nz;
                d * d
            })
            .sum::<f64>()
            / 2.0
    };
    let c = if c > 0.5 {
        1.0 - gap(1.0)
    } else if c < -0.5 {
        gap(-1.0) - 1.0
    } else {
        c
    };
    c.clamp(-1.0, 1.0)
}
