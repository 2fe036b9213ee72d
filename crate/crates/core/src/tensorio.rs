//! Binary complex-tensor container with a small text header.
//!
//! Layout: a line-oriented UTF-8 header (`key: value`) terminated by a blank
//! line, then the tensor payload as little-endian f64 pairs (real,
//! imaginary) in row-major order. Shape and dtype live in the header next to
//! free-form metadata such as the seed and config hash.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAGIC: &str = "isac-tensor v1";
const DTYPE: &str = "complex128";

/// A complex tensor together with its header metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub data: Vec<Complex64>,
    /// Metadata pairs in file order (shape/dtype excluded).
    pub metadata: Vec<(String, String)>,
}

impl TensorFile {
    pub fn from_array3(a: &Array3<Complex64>, metadata: Vec<(String, String)>) -> Self {
        let dim = a.dim();
        Self {
            shape: vec![dim.0, dim.1, dim.2],
            data: a.iter().copied().collect(),
            metadata,
        }
    }

    pub fn to_array3(&self) -> Result<Array3<Complex64>> {
        if self.shape.len() != 3 {
            return Err(Error::DimensionMismatch(format!(
                "expected rank-3 tensor, file has rank {}",
                self.shape.len()
            )));
        }
        Array3::from_shape_vec(
            (self.shape[0], self.shape[1], self.shape[2]),
            self.data.clone(),
        )
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let expected: usize = self.shape.iter().product();
        if expected != self.data.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {:?} wants {expected} entries, payload has {}",
                self.shape,
                self.data.len()
            )));
        }
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{MAGIC}")?;
        let shape = self
            .shape
            .iter()
            .map(|d| d.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "shape: {shape}")?;
        writeln!(out, "dtype: {DTYPE}")?;
        for (k, v) in &self.metadata {
            writeln!(out, "{k}: {v}")?;
        }
        writeln!(out)?;
        for z in &self.data {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = BufReader::new(std::fs::File::open(path)?);
        let mut line = String::new();
        reader.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Parse(format!(
                "not a tensor container (magic {:?})",
                line.trim_end()
            )));
        }
        let mut shape: Option<Vec<usize>> = None;
        let mut metadata = Vec::new();
        loop {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::Parse("tensor header not terminated".into()));
            }
            let trimmed = line.trim_end();
            if trimmed.is_empty() {
                break;
            }
            let (key, value) = trimmed
                .split_once(": ")
                .ok_or_else(|| Error::Parse(format!("malformed header line {trimmed:?}")))?;
            match key {
                "shape" => {
                    shape = Some(
                        value
                            .split_whitespace()
                            .map(|t| t.parse::<usize>())
                            .collect::<std::result::Result<_, _>>()
                            .map_err(|e| Error::Parse(format!("bad shape: {e}")))?,
                    );
                }
                "dtype" => {
                    if value != DTYPE {
                        return Err(Error::Parse(format!("unsupported dtype {value}")));
                    }
                }
                _ => metadata.push((key.to_string(), value.to_string())),
            }
        }
        let shape = shape.ok_or_else(|| Error::Parse("tensor header missing shape".into()))?;
        let count: usize = shape.iter().product();
        let mut bytes = vec![0u8; count * 16];
        reader.read_exact(&mut bytes)?;
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("chunk size")),
                    f64::from_le_bytes(c[8..].try_into().expect("chunk size")),
                )
            })
            .collect();
        Ok(Self {
            shape,
            data,
            metadata,
        })
    }
}
