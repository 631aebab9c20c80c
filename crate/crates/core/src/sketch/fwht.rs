use crate::error::{Error, Result};

/// Unnormalized in-place Walsh–Hadamard transform, `v <- H v`.
///
/// `H` has ±1 entries, so applying it twice multiplies by `v.len()`.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    let n = v.len();
    if !n.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(n));
    }
    let mut h = 1;
    while h < n {
        for block in v.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Sylvester construction: H[i][j] = (-1)^{popcount(i & j)}.
    fn hadamard_entry(i: usize, j: usize) -> f64 {
        if (i & j).count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    #[test]
    fn first_basis_vector_maps_to_ones() {
        assert_eq!(fwht(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn twice_is_scaled_identity() {
        let x: Vec<f64> = (0..8).map(|i| (i as f64).sin()).collect();
        let y = fwht(&fwht(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((8.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_explicit_matrix_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fwht(&x).unwrap();
        for (i, f) in fast.iter().enumerate() {
            let naive: f64 = (0..8).map(|j| hadamard_entry(i, j) * x[j]).sum();
            assert!((naive - f).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(matches!(fwht(&[1.0; 6]), Err(Error::NotPowerOfTwo(6))));
    }

    #[test]
    fn length_one_is_identity() {
        assert_eq!(fwht(&[3.5]).unwrap(), vec![3.5]);
    }
}
