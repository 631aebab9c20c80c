use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::rng::SeedStream;

/// Dense `rows × cols` matrix with i.i.d. `N(0, 1/rows)` entries, stored
/// row-major.
#[derive(Debug, Clone)]
pub struct GaussianSketch {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl GaussianSketch {
    pub fn new(rows: usize, cols: usize, stream: SeedStream) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::param("Gaussian sketch dimensions must be positive"));
        }
        let sd = 1.0 / (rows as f64).sqrt();
        let mut rng = stream.rng();
        let data = (0..rows * cols)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * sd
            })
            .collect();
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.data
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.cols, x.len())?;
        Ok(self
            .data
            .chunks_exact(self.cols)
            .map(|row| super::dot(row, x))
            .collect())
    }
}
