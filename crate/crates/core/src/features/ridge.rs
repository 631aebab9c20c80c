use nalgebra::{DMatrix, SymmetricEigen};

use super::io::FeatureMatrix;
use crate::error::{Error, Result};

/// Regularizer strengths used for the reference experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularizerPreset {
    /// 0.3, for the depth-1 fully connected runs.
    Strong,
    /// 0.03, for the depth-3 fully connected runs.
    Medium,
    /// 0.01, for the convolutional runs.
    Weak,
}

impl RegularizerPreset {
    pub fn lambda(self) -> f64 {
        match self {
            RegularizerPreset::Strong => 0.3,
            RegularizerPreset::Medium => 0.03,
            RegularizerPreset::Weak => 0.01,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "strong" => Some(Self::Strong),
            "medium" => Some(Self::Medium),
            "weak" => Some(Self::Weak),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    /// `s* × t`.
    pub weights: DMatrix<f64>,
    pub lambda: f64,
}

impl RidgeModel {
    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

/// `w = (ZᵀZ + λI)⁻¹ ZᵀY`, by Cholesky with an eigendecomposition fallback.
pub fn ridge_fit(z: &FeatureMatrix, y: &DMatrix<f64>, lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be finite and non-negative, got {lambda}")));
    }
    if y.nrows() != z.rows() {
        return Err(Error::Dimension {
            expected: z.rows(),
            got: y.nrows(),
        });
    }
    let zm = z.to_matrix();
    let mut gram = zm.tr_mul(&zm);
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    let rhs = zm.tr_mul(y);
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let tol = scale * gram.nrows() as f64 * f64::EPSILON;

    let weights = match gram.clone().cholesky() {
        Some(ch) if ch.l_dirty().diagonal().iter().all(|d| d * d > tol) => ch.solve(&rhs),
        _ => {
            let eig = SymmetricEigen::new(gram);
            if eig.eigenvalues.iter().any(|&v| v <= tol) {
                return Err(Error::Solve(
                    "the regularized Gram matrix is singular; use lambda > 0".into(),
                ));
            }
            let q = &eig.eigenvectors;
            let mut proj = q.tr_mul(&rhs);
            for (mut row, &v) in proj.row_iter_mut().zip(eig.eigenvalues.iter()) {
                row /= v;
            }
            q * proj
        }
    };
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Solve("non-finite weights".into()));
    }
    Ok(RidgeModel { weights, lambda })
}

pub fn predict(model: &RidgeModel, z: &FeatureMatrix) -> Result<DMatrix<f64>> {
    if z.cols() != model.weights.nrows() {
        return Err(Error::Dimension {
            expected: model.weights.nrows(),
            got: z.cols(),
        });
    }
    Ok(z.to_matrix() * &model.weights)
}

/// Row-wise argmax of the predictions; ties go to the lower class.
pub fn classify(model: &RidgeModel, z: &FeatureMatrix) -> Result<Vec<usize>> {
    let out = predict(model, z)?;
    Ok(out
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best })
                .0
        })
        .collect())
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if predicted.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / predicted.len() as f64
}
