use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::io::{read_exact, read_u64, Dtype};
use crate::cntk_oracle::ImageTensor;
use crate::error::{Error, Result};
use crate::sketch::SparseVector;

const IMAGE_MAGIC: &[u8; 8] = b"NTKIMG01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// Header row, then one sample per row with the label last.
    Csv,
    /// `label index:value …` with 1-based indices.
    LibSvm,
    /// Binary image batch, see [`write_images`].
    ImageTensor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Dense(Vec<Vec<f64>>),
    Sparse(Vec<SparseVector>),
    Images(Vec<ImageTensor>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Dense(v) => v.len(),
            Samples::Sparse(v) => v.len(),
            Samples::Images(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Samples,
    /// One label per sample; empty for image files written without labels.
    pub labels: Vec<f64>,
}

pub fn load_dataset(path: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let file = File::open(path)?;
    match format {
        DatasetFormat::Csv => parse_csv(file),
        DatasetFormat::LibSvm => parse_libsvm(BufReader::new(file)),
        DatasetFormat::ImageTensor => {
            let (images, labels) = read_image_stream(&mut BufReader::new(file))?;
            Ok(Dataset {
                samples: Samples::Images(images),
                labels: labels.unwrap_or_default(),
            })
        }
    }
}

fn parse_csv(input: impl Read) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse { line, message };
        if record.len() < 2 {
            return Err(parse_err("need at least one feature and a label".into()));
        }
        if *width.get_or_insert(record.len()) != record.len() {
            return Err(parse_err(format!("expected {} fields, got {}", width.unwrap(), record.len())));
        }
        let mut values = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| parse_err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        labels.push(values.pop().expect("checked length"));
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset {
        samples: Samples::Dense(rows),
        labels,
    })
}

fn parse_libsvm(input: impl BufRead) -> Result<Dataset> {
    let mut entries = Vec::new();
    let mut labels = Vec::new();
    let mut dim = 0;
    for (k, line) in input.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: line_no, message };
        let mut tokens = body.split_whitespace();
        let label: f64 = tokens
            .next()
            .expect("non-empty line")
            .parse()
            .map_err(|e| err(format!("label: {e}")))?;
        let mut pairs: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| err(format!("expected index:value, got {tok:?}")))?;
            let i: usize = i.parse().map_err(|e| err(format!("index {i:?}: {e}")))?;
            if i == 0 {
                return Err(err("indices are 1-based".into()));
            }
            let v: f64 = v.parse().map_err(|e| err(format!("value {v:?}: {e}")))?;
            if pairs.last().is_some_and(|&(prev, _)| prev >= i - 1) {
                return Err(err("indices must be strictly increasing".into()));
            }
            pairs.push((i - 1, v));
            dim = dim.max(i);
        }
        labels.push(label);
        entries.push(pairs);
    }
    if entries.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let samples = entries
        .into_iter()
        .map(|pairs| {
            let (idx, val) = pairs.into_iter().filter(|&(_, v)| v != 0.0).unzip();
            SparseVector::new(dim, idx, val)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        samples: Samples::Sparse(samples),
        labels,
    })
}

/// Reads an image batch; see [`write_images`] for the layout.
pub fn read_images(path: impl AsRef<Path>) -> Result<(Vec<ImageTensor>, Option<Vec<f64>>)> {
    read_image_stream(&mut BufReader::new(File::open(path)?))
}

/// Image batch layout: magic `NTKIMG01`, little-endian u64 `d₁, d₂, c, n`,
/// a u8 dtype (0 = f32, 1 = f64), then `n` images of `d₁·d₂·c` values each
/// in `(i, j, channel)` row-major order. An optional trailing block of `n`
/// values of the same dtype holds labels.
pub fn write_images(path: impl AsRef<Path>, images: &[ImageTensor], labels: Option<&[f64]>, dtype: Dtype) -> Result<()> {
    let first = images.first().ok_or(Error::EmptyDataset)?;
    let (d1, d2, c) = first.dims();
    if let Some(l) = labels {
        if l.len() != images.len() {
            return Err(Error::Dimension {
                expected: images.len(),
                got: l.len(),
            });
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(IMAGE_MAGIC)?;
    for v in [d1, d2, c, images.len()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&[dtype as u8])?;
    let mut put = |v: f64| -> std::io::Result<()> {
        match dtype {
            Dtype::F32 => w.write_all(&(v as f32).to_le_bytes()),
            Dtype::F64 => w.write_all(&v.to_le_bytes()),
        }
    };
    for img in images {
        if img.dims() != (d1, d2, c) {
            return Err(Error::Format("images in one batch must share their shape".into()));
        }
        img.data().iter().try_for_each(|&v| put(v))?;
    }
    if let Some(l) = labels {
        l.iter().try_for_each(|&v| put(v))?;
    }
    w.flush()?;
    Ok(())
}

fn read_image_stream(r: &mut impl Read) -> Result<(Vec<ImageTensor>, Option<Vec<f64>>)> {
    let mut magic = [0u8; 8];
    read_exact(r, &mut magic, "magic")?;
    if &magic != IMAGE_MAGIC {
        return Err(Error::Format("bad magic, not an image batch".into()));
    }
    let d1 = read_u64(r, "d1")? as usize;
    let d2 = read_u64(r, "d2")? as usize;
    let c = read_u64(r, "channels")? as usize;
    let n = read_u64(r, "image count")? as usize;
    let mut dtype = [0u8; 1];
    read_exact(r, &mut dtype, "dtype")?;
    let width = match dtype[0] {
        0 => 4,
        1 => 8,
        other => return Err(Error::Format(format!("unknown dtype code {other}"))),
    };
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let per = d1
        .checked_mul(d2)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::Format("image size overflows".into()))?;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let values: Vec<f64> = if width == 4 {
        body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64).collect()
    } else {
        body.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
    };
    let labelled = if body.len() == n * per * width {
        false
    } else if body.len() == n * (per + 1) * width {
        true
    } else {
        return Err(Error::Format(format!(
            "body holds {} bytes, expected {} (or {} with labels)",
            body.len(),
            n * per * width,
            n * (per + 1) * width
        )));
    };
    let images = values[..n * per]
        .chunks_exact(per)
        .map(|chunk| ImageTensor::new(d1, d2, c, chunk.to_vec()))
        .collect::<Result<_>>()?;
    let labels = labelled.then(|| values[n * per..].to_vec());
    Ok((images, labels))
}
