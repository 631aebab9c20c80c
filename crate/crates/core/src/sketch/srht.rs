use rand::Rng;

use super::{fwht_in_place, next_pow2, InputVector};
use crate::error::{check_dim, Error, Result};
use crate::rng::SeedStream;

/// Subsampled randomized Hadamard transform `x -> sqrt(D/m) P H Σ x`.
///
/// `H` is the orthonormal Hadamard matrix of the padded dimension `D`, `Σ` a
/// random sign diagonal and `P` samples `m` rows uniformly with replacement.
#[derive(Debug, Clone)]
pub struct SrhtSketch {
    input_dim: usize,
    padded_dim: usize,
    output_dim: usize,
    signs: Vec<f64>,
    rows: Vec<u32>,
    stream: SeedStream,
}

impl SrhtSketch {
    pub fn new(input_dim: usize, output_dim: usize, stream: SeedStream) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::param("SRHT dimensions must be positive"));
        }
        let padded_dim = next_pow2(input_dim);
        let mut rng = stream.rng();
        let signs = (0..padded_dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let rows = (0..output_dim)
            .map(|_| rng.random_range(0..padded_dim) as u32)
            .collect();
        Ok(Self {
            input_dim,
            padded_dim,
            output_dim,
            signs,
            rows,
            stream,
        })
    }

    pub fn from_seed(input_dim: usize, output_dim: usize, seed: u64) -> Result<Self> {
        Self::new(input_dim, output_dim, SeedStream::new(seed))
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn sign_flips(&self) -> &[f64] {
        &self.signs
    }

    pub fn sampled_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|&r| r as usize)
    }

    pub fn stream(&self) -> SeedStream {
        self.stream
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_input(InputVector::Dense(x))
    }

    pub fn apply_input(&self, x: InputVector<'_>) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.dim())?;
        let mut buf = vec![0.0; self.padded_dim];
        x.for_each(|i, v| buf[i] = v * self.signs[i]);
        fwht_in_place(&mut buf)?;
        // sqrt(D/m) times the 1/sqrt(D) of the orthonormal Hadamard.
        let scale = 1.0 / (self.output_dim as f64).sqrt();
        Ok(self.rows.iter().map(|&r| buf[r as usize] * scale).collect())
    }
}
