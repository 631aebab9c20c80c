use rand::Rng;

use super::{fwht_in_place, next_pow2};
use crate::error::{check_dim, Error, Result};
use crate::rng::SeedStream;

/// TensorSRHT: sketches `x ⊗ y` from the two factors without forming the
/// tensor. Entry `k` is `(H Σ₁ x)[i_k] · (H Σ₂ y)[j_k] / sqrt(m)` with the
/// unnormalized Hadamard `H`, which makes `⟨T(x⊗y), T(z⊗w)⟩` an unbiased
/// estimate of `⟨x,z⟩⟨y,w⟩`.
#[derive(Debug, Clone)]
pub struct TensorSrhtSketch {
    left_dim: usize,
    right_dim: usize,
    left_padded: usize,
    right_padded: usize,
    output_dim: usize,
    left_signs: Vec<f64>,
    right_signs: Vec<f64>,
    pairs: Vec<(u32, u32)>,
}

impl TensorSrhtSketch {
    pub fn new(
        left_dim: usize,
        right_dim: usize,
        output_dim: usize,
        stream: SeedStream,
    ) -> Result<Self> {
        if left_dim == 0 || right_dim == 0 || output_dim == 0 {
            return Err(Error::param("TensorSRHT dimensions must be positive"));
        }
        let left_padded = next_pow2(left_dim);
        let right_padded = next_pow2(right_dim);
        let mut rng = stream.rng();
        let mut signs = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        };
        let left_signs = signs(left_padded);
        let right_signs = signs(right_padded);
        let pairs = (0..output_dim)
            .map(|_| {
                (
                    rng.random_range(0..left_padded) as u32,
                    rng.random_range(0..right_padded) as u32,
                )
            })
            .collect();
        Ok(Self {
            left_dim,
            right_dim,
            left_padded,
            right_padded,
            output_dim,
            left_signs,
            right_signs,
            pairs,
        })
    }

    pub fn from_seed(left_dim: usize, right_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        Self::new(left_dim, right_dim, output_dim, SeedStream::new(seed))
    }

    pub fn input_dims(&self) -> (usize, usize) {
        (self.left_dim, self.right_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn row_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().map(|&(i, j)| (i as usize, j as usize))
    }

    fn transform(x: &[f64], signs: &[f64], padded: usize) -> Vec<f64> {
        let mut buf = vec![0.0; padded];
        for ((b, &v), &s) in buf.iter_mut().zip(x).zip(signs) {
            *b = v * s;
        }
        fwht_in_place(&mut buf).expect("padded length is a power of two");
        buf
    }

    /// `H Σ₁ x` over the padded left dimension.
    pub fn transform_left(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.left_dim, x.len())?;
        Ok(Self::transform(x, &self.left_signs, self.left_padded))
    }

    /// `H Σ₂ y` over the padded right dimension.
    pub fn transform_right(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.right_dim, y.len())?;
        Ok(Self::transform(y, &self.right_signs, self.right_padded))
    }

    /// Samples the row pairs from already transformed factors.
    pub fn combine(&self, left: &[f64], right: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.left_padded, left.len())?;
        check_dim(self.right_padded, right.len())?;
        let scale = 1.0 / (self.output_dim as f64).sqrt();
        Ok(self
            .pairs
            .iter()
            .map(|&(i, j)| left[i as usize] * right[j as usize] * scale)
            .collect())
    }

    pub fn apply(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        let u = self.transform_left(x)?;
        let v = self.transform_right(y)?;
        self.combine(&u, &v)
    }
}
