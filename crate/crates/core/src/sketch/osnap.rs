use rand::Rng;

use super::InputVector;
use crate::error::{check_dim, Error, Result};
use crate::rng::SeedStream;

pub const DEFAULT_OSNAP_SPARSITY: usize = 8;

/// OSNAP sparse embedding. The `m` output rows are split into `s` contiguous
/// blocks and every input column gets one random row and sign per block, so
/// each column has exactly `s` nonzeros of value `±1/sqrt(s)`.
#[derive(Debug, Clone)]
pub struct OsnapSketch {
    input_dim: usize,
    output_dim: usize,
    sparsity: usize,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl OsnapSketch {
    /// Sparsity is capped at `output_dim`.
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        sparsity: usize,
        stream: SeedStream,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || sparsity == 0 {
            return Err(Error::param("OSNAP dimensions and sparsity must be positive"));
        }
        let sparsity = sparsity.min(output_dim);
        let magnitude = 1.0 / (sparsity as f64).sqrt();
        let mut rng = stream.rng();
        let mut rows = Vec::with_capacity(input_dim * sparsity);
        let mut values = Vec::with_capacity(input_dim * sparsity);
        for _ in 0..input_dim {
            for b in 0..sparsity {
                let lo = b * output_dim / sparsity;
                let hi = (b + 1) * output_dim / sparsity;
                rows.push(rng.random_range(lo..hi) as u32);
                values.push(if rng.random::<bool>() { magnitude } else { -magnitude });
            }
        }
        Ok(Self {
            input_dim,
            output_dim,
            sparsity,
            rows,
            values,
        })
    }

    pub fn from_seed(input_dim: usize, output_dim: usize, sparsity: usize, seed: u64) -> Result<Self> {
        Self::new(input_dim, output_dim, sparsity, SeedStream::new(seed))
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn sparsity(&self) -> usize {
        self.sparsity
    }

    /// `(row, value)` entries of input column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = j * self.sparsity..(j + 1) * self.sparsity;
        self.rows[span.clone()]
            .iter()
            .zip(&self.values[span])
            .map(|(&r, &v)| (r as usize, v))
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_input(InputVector::Dense(x))
    }

    /// Cost is `s · nnz(x)` for sparse inputs.
    pub fn apply_input(&self, x: InputVector<'_>) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.dim())?;
        let mut out = vec![0.0; self.output_dim];
        x.for_each(|j, v| {
            if v != 0.0 {
                for (r, s) in self.column(j) {
                    out[r] += s * v;
                }
            }
        });
        Ok(out)
    }
}
