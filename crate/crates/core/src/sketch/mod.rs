//! Base linear sketches: the Walsh–Hadamard transform, SRHT, TensorSRHT,
//! OSNAP and a dense Gaussian projection.
//!
//! All sketches are immutable once built and fully determined by their
//! dimensions and [`SeedStream`](crate::rng::SeedStream).

mod fwht;
mod gaussian;
mod osnap;
mod srht;
mod tensor_srht;

pub use fwht::{fwht, fwht_in_place};
pub use gaussian::GaussianSketch;
pub use osnap::{OsnapSketch, DEFAULT_OSNAP_SPARSITY};
pub use srht::SrhtSketch;
pub use tensor_srht::TensorSrhtSketch;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse vector in coordinate form with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::Dimension {
                expected: indices.len(),
                got: values.len(),
            });
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::param("sparse indices must be strictly increasing"));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: last + 1,
                });
            }
        }
        Ok(Self {
            dim,
            indices,
            values,
        })
    }

    /// Keeps the nonzero entries of a dense slice.
    pub fn from_dense(x: &[f64]) -> Self {
        let (indices, values) = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self {
            dim: x.len(),
            indices,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            indices: self.indices.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// Borrowed view over either storage layout, so sparse inputs are never
/// densified on the way into a sketch.
#[derive(Debug, Clone, Copy)]
pub enum InputVector<'a> {
    Dense(&'a [f64]),
    Sparse(&'a SparseVector),
}

impl<'a> From<&'a [f64]> for InputVector<'a> {
    fn from(x: &'a [f64]) -> Self {
        InputVector::Dense(x)
    }
}

impl<'a> From<&'a Vec<f64>> for InputVector<'a> {
    fn from(x: &'a Vec<f64>) -> Self {
        InputVector::Dense(x.as_slice())
    }
}

impl<'a> From<&'a SparseVector> for InputVector<'a> {
    fn from(x: &'a SparseVector) -> Self {
        InputVector::Sparse(x)
    }
}

impl InputVector<'_> {
    pub fn dim(&self) -> usize {
        match self {
            InputVector::Dense(x) => x.len(),
            InputVector::Sparse(x) => x.dim,
        }
    }

    pub fn norm(&self) -> f64 {
        let values = match self {
            InputVector::Dense(x) => *x,
            InputVector::Sparse(x) => x.values.as_slice(),
        };
        values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Calls `f(index, value)` for every stored entry (zeros included for
    /// dense inputs).
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            InputVector::Dense(x) => x.iter().enumerate().for_each(|(i, &v)| f(i, v)),
            InputVector::Sparse(x) => x
                .indices
                .iter()
                .zip(&x.values)
                .for_each(|(&i, &v)| f(i, v)),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}
