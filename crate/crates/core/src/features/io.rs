use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NTKFEAT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchKind {
    Ntk,
    Cntk,
}

/// Where a feature matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: SketchKind,
    /// Truncated SHA-256 of the serialized map configuration.
    pub config_hash: String,
    pub seed: u64,
    /// Sample labels carried along for the regression step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<f64>>,
}

impl Provenance {
    pub fn hash_of(bytes: &[u8]) -> String {
        hex::encode(&Sha256::digest(bytes)[..8])
    }
}

/// Row-major `n × s*` features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite feature at flat index {bad}")));
        }
        Ok(Self {
            rows,
            cols,
            data,
            provenance,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_matrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn with_labels(mut self, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != self.rows {
            return Err(Error::Dimension {
                expected: self.rows,
                got: labels.len(),
            });
        }
        self.provenance.labels = Some(labels);
        Ok(self)
    }
}

/// Writes the binary feature format. With [`Dtype::F32`] the values are
/// rounded to single precision.
pub fn save_features(path: impl AsRef<Path>, fm: &FeatureMatrix, dtype: Dtype) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(fm.rows as u64).to_le_bytes())?;
    w.write_all(&(fm.cols as u64).to_le_bytes())?;
    w.write_all(&[dtype as u8])?;
    let prov = serde_json::to_vec(&fm.provenance)?;
    w.write_all(&(prov.len() as u64).to_le_bytes())?;
    w.write_all(&prov)?;
    match dtype {
        Dtype::F32 => {
            for &v in &fm.data {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        Dtype::F64 => {
            for &v in &fm.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not a feature file".into()));
    }
    let rows = read_u64(&mut r, "row count")? as usize;
    let cols = read_u64(&mut r, "column count")? as usize;
    let mut dtype = [0u8; 1];
    read_exact(&mut r, &mut dtype, "dtype")?;
    let width = match dtype[0] {
        0 => 4,
        1 => 8,
        other => return Err(Error::Format(format!("unknown dtype code {other}"))),
    };
    let prov_len = read_u64(&mut r, "provenance length")?;
    let mut prov = Vec::new();
    (&mut r).take(prov_len).read_to_end(&mut prov)?;
    if prov.len() as u64 != prov_len {
        return Err(Error::Format("truncated provenance".into()));
    }
    let provenance: Provenance = serde_json::from_slice(&prov)?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Format("matrix size overflows".into()))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * width {
        return Err(Error::Format(format!(
            "payload holds {} bytes, expected {}",
            payload.len(),
            count * width
        )));
    }
    let data = if width == 4 {
        payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect()
    } else {
        payload
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect()
    };
    FeatureMatrix::new(rows, cols, data, provenance)
}

pub(crate) fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format(format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

pub(crate) fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}
