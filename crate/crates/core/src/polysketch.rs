//! Degree-p PolySketch: a complete binary tree of TensorSRHT nodes over
//! OSNAP leaves, sketching `v₁ ⊗ … ⊗ v_p` without forming the tensor.
//!
//! Degrees that are not a power of two are padded with `e₁` factors on the
//! rightmost leaves; `⟨e₁, e₁⟩ = 1` so inner products are unchanged.

use crate::error::{check_dim, Error, Result};
use crate::rng::SeedStream;
use crate::sketch::{InputVector, OsnapSketch, TensorSrhtSketch, DEFAULT_OSNAP_SPARSITY};

#[derive(Debug, Clone)]
pub enum LeafSketch {
    Osnap(OsnapSketch),
    /// Dense inputs skip the leaf embedding and go straight to TensorSRHT.
    Identity,
}

impl LeafSketch {
    fn apply(&self, x: InputVector<'_>) -> Result<Vec<f64>> {
        match self {
            LeafSketch::Osnap(o) => o.apply_input(x),
            LeafSketch::Identity => Ok(match x {
                InputVector::Dense(v) => v.to_vec(),
                InputVector::Sparse(s) => s.to_dense(),
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolySketchTree {
    degree: usize,
    padded_degree: usize,
    input_dim: usize,
    internal_dim: usize,
    leaves: Vec<LeafSketch>,
    /// Image of `e₁` under each leaf.
    leaf_e1: Vec<Vec<f64>>,
    /// `levels[0]` sits directly above the leaves; the last level is the root.
    levels: Vec<Vec<TensorSrhtSketch>>,
    stream: SeedStream,
}

/// Per-node state kept while re-propagating single-leaf updates.
struct NodeCache {
    left: Vec<f64>,
    right: Vec<f64>,
    out: Vec<f64>,
}

impl PolySketchTree {
    /// Builds a tree of degree `p` for inputs of dimension `d` with output
    /// and internal dimension `m`. A degree-1 tree always keeps its OSNAP leaf
    /// so that its output dimension is `m`.
    pub fn new(
        degree: usize,
        input_dim: usize,
        internal_dim: usize,
        stream: SeedStream,
        use_sparse_leaves: bool,
    ) -> Result<Self> {
        Self::with_sparsity(
            degree,
            input_dim,
            internal_dim,
            stream,
            use_sparse_leaves,
            DEFAULT_OSNAP_SPARSITY,
        )
    }

    pub fn with_sparsity(
        degree: usize,
        input_dim: usize,
        internal_dim: usize,
        stream: SeedStream,
        use_sparse_leaves: bool,
        osnap_sparsity: usize,
    ) -> Result<Self> {
        if degree == 0 || input_dim == 0 || internal_dim == 0 {
            return Err(Error::param(format!(
                "PolySketch needs p, d, m >= 1 (got p={degree}, d={input_dim}, m={internal_dim})"
            )));
        }
        let padded_degree = degree.next_power_of_two();
        let sparse = use_sparse_leaves || padded_degree == 1;
        let leaf_stream = stream.child(0);
        let leaves = (0..padded_degree)
            .map(|k| {
                if sparse {
                    OsnapSketch::new(
                        input_dim,
                        internal_dim,
                        osnap_sparsity,
                        leaf_stream.child(k as u64),
                    )
                    .map(LeafSketch::Osnap)
                } else {
                    Ok(LeafSketch::Identity)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let leaf_dim = if sparse { internal_dim } else { input_dim };
        let mut e1 = vec![0.0; input_dim];
        e1[0] = 1.0;
        let leaf_e1 = leaves
            .iter()
            .map(|l| l.apply(InputVector::Dense(&e1)))
            .collect::<Result<Vec<_>>>()?;

        let node_stream = stream.child(1);
        let mut levels = Vec::new();
        let mut width = padded_degree / 2;
        let mut child_dim = leaf_dim;
        while width >= 1 {
            let level_stream = node_stream.child(levels.len() as u64);
            let nodes = (0..width)
                .map(|k| {
                    TensorSrhtSketch::new(
                        child_dim,
                        child_dim,
                        internal_dim,
                        level_stream.child(k as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            levels.push(nodes);
            child_dim = internal_dim;
            width /= 2;
        }
        Ok(Self {
            degree,
            padded_degree,
            input_dim,
            internal_dim,
            leaves,
            leaf_e1,
            levels,
            stream,
        })
    }

    pub fn from_seed(degree: usize, input_dim: usize, internal_dim: usize, seed: u64, use_sparse_leaves: bool) -> Result<Self> {
        Self::new(degree, input_dim, internal_dim, SeedStream::new(seed), use_sparse_leaves)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn padded_degree(&self) -> usize {
        self.padded_degree
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.internal_dim
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn internal_node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn stream(&self) -> SeedStream {
        self.stream
    }

    fn evaluate(&self, leaf_out: Vec<Vec<f64>>) -> Result<(Vec<Vec<NodeCache>>, Vec<f64>)> {
        if self.levels.is_empty() {
            let root = leaf_out.into_iter().next().expect("one leaf");
            return Ok((Vec::new(), root));
        }
        let mut caches: Vec<Vec<NodeCache>> = Vec::with_capacity(self.levels.len());
        for (lvl, nodes) in self.levels.iter().enumerate() {
            let level = {
                let below: Vec<&[f64]> = if lvl == 0 {
                    leaf_out.iter().map(Vec::as_slice).collect()
                } else {
                    caches[lvl - 1].iter().map(|c| c.out.as_slice()).collect()
                };
                nodes
                    .iter()
                    .enumerate()
                    .map(|(k, node)| {
                        let left = node.transform_left(below[2 * k])?;
                        let right = node.transform_right(below[2 * k + 1])?;
                        let out = node.combine(&left, &right)?;
                        Ok(NodeCache { left, right, out })
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            caches.push(level);
        }
        let root = caches.last().expect("root level")[0].out.clone();
        Ok((caches, root))
    }

    /// Replaces the output of leaf `leaf` and recomputes its path to the root.
    fn update_path(&self, caches: &mut [Vec<NodeCache>], leaf: usize, value: &[f64]) -> Result<()> {
        let mut idx = leaf;
        let mut child: Vec<f64> = value.to_vec();
        for (level, nodes) in self.levels.iter().enumerate() {
            let k = idx / 2;
            let node = &nodes[k];
            let cache = &mut caches[level][k];
            if idx.is_multiple_of(2) {
                cache.left = node.transform_left(&child)?;
            } else {
                cache.right = node.transform_right(&child)?;
            }
            cache.out = node.combine(&cache.left, &cache.right)?;
            child.clone_from(&cache.out);
            idx = k;
        }
        Ok(())
    }

    fn leaf_outputs(&self, factors: &[InputVector<'_>]) -> Result<Vec<Vec<f64>>> {
        (0..self.padded_degree)
            .map(|k| match factors.get(k) {
                Some(v) => self.leaves[k].apply(*v),
                None => Ok(self.leaf_e1[k].clone()),
            })
            .collect()
    }

    /// Sketch of `x^{⊗(p−j)} ⊗ e₁^{⊗j}` for `j = 0..=p`.
    ///
    /// The all-`x` tree is evaluated once; each further entry swaps one more
    /// leaf for `e₁`, right to left, and recomputes only that leaf's path.
    pub fn apply_tensor_power_prefixes<'a>(&self, x: impl Into<InputVector<'a>>) -> Result<Vec<Vec<f64>>> {
        let x = x.into();
        check_dim(self.input_dim, x.dim())?;
        let leaf = |k: usize| self.leaves[k].apply(x);
        let mut leaf_out = Vec::with_capacity(self.padded_degree);
        // Leaves with an identical map share the image of x.
        let shared = if matches!(self.leaves[0], LeafSketch::Identity) {
            Some(leaf(0)?)
        } else {
            None
        };
        for k in 0..self.padded_degree {
            if k >= self.degree {
                leaf_out.push(self.leaf_e1[k].clone());
            } else if let Some(s) = &shared {
                leaf_out.push(s.clone());
            } else {
                leaf_out.push(leaf(k)?);
            }
        }
        let (mut caches, root) = self.evaluate(leaf_out)?;
        let mut out = Vec::with_capacity(self.degree + 1);
        out.push(root);
        for j in 1..=self.degree {
            let k = self.degree - j;
            if self.levels.is_empty() {
                out.push(self.leaf_e1[k].clone());
                continue;
            }
            self.update_path(&mut caches, k, &self.leaf_e1[k])?;
            out.push(caches.last().expect("root level")[0].out.clone());
        }
        Ok(out)
    }

    /// `⊕_{l=0..=p} w_l · Q(x^{⊗l} ⊗ e₁^{⊗(p−l)})`, a vector of length
    /// `(p+1)·m` whose inner products estimate `Σ_l w_l² ⟨x, y⟩^l`.
    pub fn apply_polynomial<'a>(&self, x: impl Into<InputVector<'a>>, weights: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.degree + 1, weights.len())?;
        let prefixes = self.apply_tensor_power_prefixes(x)?;
        let m = self.internal_dim;
        let mut out = vec![0.0; (self.degree + 1) * m];
        for (l, (block, &w)) in out.chunks_exact_mut(m).zip(weights).enumerate() {
            if w != 0.0 {
                for (o, v) in block.iter_mut().zip(&prefixes[self.degree - l]) {
                    *o = w * v;
                }
            }
        }
        Ok(out)
    }

    /// Sketch of `x^{⊗p}` alone.
    pub fn apply_power<'a>(&self, x: impl Into<InputVector<'a>>) -> Result<Vec<f64>> {
        let x = x.into();
        check_dim(self.input_dim, x.dim())?;
        let factors = vec![x; self.degree];
        self.apply_tensor_product_inputs(&factors)
    }

    /// Sketch of `v₁ ⊗ … ⊗ v_p` for exactly `p` factors.
    pub fn apply_tensor_product(&self, factors: &[&[f64]]) -> Result<Vec<f64>> {
        let inputs: Vec<InputVector<'_>> = factors.iter().map(|f| InputVector::Dense(f)).collect();
        self.apply_tensor_product_inputs(&inputs)
    }

    pub fn apply_tensor_product_inputs(&self, factors: &[InputVector<'_>]) -> Result<Vec<f64>> {
        if factors.len() != self.degree {
            return Err(Error::param(format!(
                "expected {} tensor factors, got {}",
                self.degree,
                factors.len()
            )));
        }
        for f in factors {
            check_dim(self.input_dim, f.dim())?;
        }
        let leaf_out = self.leaf_outputs(factors)?;
        Ok(self.evaluate(leaf_out)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_shape() {
        let t = PolySketchTree::from_seed(1, 8, 16, 0, true).unwrap();
        assert_eq!((t.leaf_count(), t.internal_node_count()), (1, 0));
        assert_eq!(t.output_dim(), 16);
        let t = PolySketchTree::from_seed(3, 8, 16, 0, true).unwrap();
        assert_eq!((t.padded_degree(), t.leaf_count(), t.internal_node_count()), (4, 4, 3));
        let t = PolySketchTree::from_seed(8, 8, 16, 0, false).unwrap();
        assert_eq!((t.leaf_count(), t.internal_node_count()), (8, 7));
        // degree one keeps its leaf embedding even in dense mode
        let t = PolySketchTree::from_seed(1, 8, 16, 0, false).unwrap();
        assert_eq!(t.apply_power(&vec![1.0; 8]).unwrap().len(), 16);
    }

    #[test]
    fn degree_one_prefixes() {
        let t = PolySketchTree::from_seed(1, 5, 12, 3, true).unwrap();
        let x = vec![0.5, -1.0, 0.0, 2.0, 1.0];
        let out = t.apply_tensor_power_prefixes(&x).unwrap();
        assert_eq!(out.len(), 2);
        let LeafSketch::Osnap(leaf) = &t.leaves[0] else { panic!() };
        assert_eq!(out[0], leaf.apply(&x).unwrap());
        let mut e1 = vec![0.0; 5];
        e1[0] = 1.0;
        assert_eq!(out[1], leaf.apply(&e1).unwrap());
    }

    #[test]
    fn product_matches_prefix_zero_bitwise() {
        for &(p, sparse) in &[(2, true), (3, true), (3, false), (5, false)] {
            let t = PolySketchTree::from_seed(p, 6, 32, 17, sparse).unwrap();
            let x: Vec<f64> = (0..6).map(|i| (i as f64 + 0.3).sin()).collect();
            let factors: Vec<&[f64]> = vec![&x; p];
            let direct = t.apply_tensor_product(&factors).unwrap();
            let prefixes = t.apply_tensor_power_prefixes(&x).unwrap();
            assert_eq!(direct, prefixes[0]);
            assert_eq!(prefixes.len(), p + 1);
        }
    }

    #[test]
    fn prefixes_match_direct_products() {
        let p = 3;
        let t = PolySketchTree::from_seed(p, 4, 32, 5, true).unwrap();
        let x = vec![0.2, 0.9, -0.4, 1.0];
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let prefixes = t.apply_tensor_power_prefixes(&x).unwrap();
        for (j, pre) in prefixes.iter().enumerate() {
            let factors: Vec<&[f64]> = (0..p).map(|k| if k < p - j { &x[..] } else { &e1[..] }).collect();
            let direct = t.apply_tensor_product(&factors).unwrap();
            for (a, b) in direct.iter().zip(pre) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_factor_annihilates() {
        let t = PolySketchTree::from_seed(2, 4, 16, 1, true).unwrap();
        let out = t.apply_tensor_product(&[&[1.0, 2.0, 3.0, 4.0], &[0.0; 4]]).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_factor_count_or_dim() {
        let t = PolySketchTree::from_seed(2, 4, 16, 1, true).unwrap();
        assert!(t.apply_tensor_product(&[&[1.0; 4]]).is_err());
        assert!(t.apply_tensor_product(&[&[1.0; 4], &[1.0; 3]]).is_err());
        assert!(t.apply_tensor_power_prefixes(&vec![1.0; 5]).is_err());
    }

    #[test]
    fn rejects_zero_parameters() {
        assert!(PolySketchTree::from_seed(0, 4, 4, 0, true).is_err());
        assert!(PolySketchTree::from_seed(2, 0, 4, 0, true).is_err());
        assert!(PolySketchTree::from_seed(2, 4, 0, 0, true).is_err());
    }
}
