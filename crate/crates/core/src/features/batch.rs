use rayon::prelude::*;
use serde::Serialize;

use super::io::{FeatureMatrix, Provenance, SketchKind};
use crate::cntk_oracle::ImageTensor;
use crate::cntk_sketch::CntkSketchState;
use crate::error::{Error, Result};
use crate::ntk_sketch::{NtkSketchState, SketchConfig};
use crate::sketch::SparseVector;

/// A frozen feature map over inputs of type `I`.
pub trait FeatureMap<I> {
    fn kind(&self) -> SketchKind;
    fn config(&self) -> &SketchConfig;
    fn output_dim(&self) -> usize;
    /// Shape of the accepted inputs, folded into the provenance hash.
    fn input_shape(&self) -> Vec<usize>;
    fn map(&self, x: &I) -> Result<Vec<f64>>;
}

impl FeatureMap<Vec<f64>> for NtkSketchState {
    fn kind(&self) -> SketchKind {
        SketchKind::Ntk
    }
    fn config(&self) -> &SketchConfig {
        NtkSketchState::config(self)
    }
    fn output_dim(&self) -> usize {
        NtkSketchState::output_dim(self)
    }
    fn input_shape(&self) -> Vec<usize> {
        vec![self.input_dim()]
    }
    fn map(&self, x: &Vec<f64>) -> Result<Vec<f64>> {
        self.transform(x)
    }
}

impl FeatureMap<SparseVector> for NtkSketchState {
    fn kind(&self) -> SketchKind {
        SketchKind::Ntk
    }
    fn config(&self) -> &SketchConfig {
        NtkSketchState::config(self)
    }
    fn output_dim(&self) -> usize {
        NtkSketchState::output_dim(self)
    }
    fn input_shape(&self) -> Vec<usize> {
        vec![self.input_dim()]
    }
    fn map(&self, x: &SparseVector) -> Result<Vec<f64>> {
        self.transform(x)
    }
}

impl FeatureMap<ImageTensor> for CntkSketchState {
    fn kind(&self) -> SketchKind {
        SketchKind::Cntk
    }
    fn config(&self) -> &SketchConfig {
        CntkSketchState::config(self)
    }
    fn output_dim(&self) -> usize {
        CntkSketchState::output_dim(self)
    }
    fn input_shape(&self) -> Vec<usize> {
        let (d1, d2, c) = self.image_dims();
        vec![d1, d2, c, self.filter()]
    }
    fn map(&self, x: &ImageTensor) -> Result<Vec<f64>> {
        self.transform(x)
    }
}

/// Maps every sample in parallel. Rows are independent, so the result is
/// bit-identical to [`batch_transform_serial`].
pub fn batch_transform<I, M>(map: &M, data: &[I]) -> Result<FeatureMatrix>
where
    I: Sync,
    M: FeatureMap<I> + Sync,
{
    let rows: Vec<Vec<f64>> = data
        .par_iter()
        .enumerate()
        .map(|(index, x)| map.map(x).map_err(|e| wrap(index, e)))
        .collect::<Result<_>>()?;
    assemble(map, rows)
}

pub fn batch_transform_serial<I, M: FeatureMap<I>>(map: &M, data: &[I]) -> Result<FeatureMatrix> {
    let rows: Vec<Vec<f64>> = data
        .iter()
        .enumerate()
        .map(|(index, x)| map.map(x).map_err(|e| wrap(index, e)))
        .collect::<Result<_>>()?;
    assemble(map, rows)
}

fn wrap(index: usize, e: Error) -> Error {
    Error::Sample {
        index,
        source: Box::new(e),
    }
}

fn assemble<I, M: FeatureMap<I>>(map: &M, rows: Vec<Vec<f64>>) -> Result<FeatureMatrix> {
    #[derive(Serialize)]
    struct Hashed<'a> {
        kind: SketchKind,
        input_shape: Vec<usize>,
        config: &'a SketchConfig,
    }
    let hashed = Hashed {
        kind: map.kind(),
        input_shape: map.input_shape(),
        config: map.config(),
    };
    let provenance = Provenance {
        kind: map.kind(),
        config_hash: Provenance::hash_of(&serde_json::to_vec(&hashed)?),
        seed: map.config().seed,
        labels: None,
    };
    let cols = map.output_dim();
    let n = rows.len();
    FeatureMatrix::new(n, cols, rows.concat(), provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntk_sketch::SketchDims;

    fn state() -> NtkSketchState {
        let cfg = SketchConfig::new(1, 0.5, 0.1, 11)
            .unwrap()
            .with_degrees(1, 1)
            .with_dims(SketchDims::uniform(32));
        NtkSketchState::new(3, cfg).unwrap()
    }

    #[test]
    fn single_row_matches_transform() {
        let st = state();
        let x = vec![1.0, -2.0, 0.5];
        let fm = batch_transform(&st, std::slice::from_ref(&x)).unwrap();
        assert_eq!(fm.rows(), 1);
        assert_eq!(fm.row(0), st.transform(&x).unwrap().as_slice());
    }

    #[test]
    fn parallel_equals_serial() {
        let st = state();
        let data: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 + 1.0, (i as f64).cos(), -0.3]).collect();
        let a = batch_transform(&st, &data).unwrap();
        let b = batch_transform_serial(&st, &data).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_row_reports_index() {
        let st = state();
        let data = vec![vec![1.0, 0.0, 0.0], vec![0.0; 3]];
        match batch_transform(&st, &data) {
            Err(Error::Sample { index, source }) => {
                assert_eq!(index, 1);
                assert!(matches!(*source, Error::ZeroInput));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
