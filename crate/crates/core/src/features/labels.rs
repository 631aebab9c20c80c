use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Zero-mean one-hot targets: class `j` becomes `e_j − (1/t)·1`.
pub fn encode_labels(labels: &[usize], classes: usize) -> Result<DMatrix<f64>> {
    if classes == 0 {
        return Err(Error::param("at least one class is required"));
    }
    let shift = 1.0 / classes as f64;
    let mut out = DMatrix::from_element(labels.len(), classes, -shift);
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        out[(row, label)] = 1.0 - shift;
    }
    Ok(out)
}

/// Interprets real-valued labels as class ids `0, 1, …`.
pub fn class_ids(labels: &[f64]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(Error::param(format!("label {v} is not a class id")))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_classes() {
        let y = encode_labels(&[3], 10).unwrap();
        for k in 0..10 {
            let want = if k == 3 { 0.9 } else { -0.1 };
            assert!((y[(0, k)] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn binary_and_row_sums() {
        let y = encode_labels(&[0, 1, 1], 2).unwrap();
        assert_eq!((y[(0, 0)], y[(0, 1)]), (0.5, -0.5));
        for r in 0..3 {
            assert!(y.row(r).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(
            encode_labels(&[0, 4], 3),
            Err(Error::LabelOutOfRange { label: 4, classes: 3 })
        ));
        assert!(class_ids(&[1.0, 0.5]).is_err());
        assert_eq!(class_ids(&[2.0, 0.0]).unwrap(), vec![2, 0]);
    }
}
