//! The `DBOF` binary matrix format.
//!
//! Layout: the ASCII magic `DBOF`, then `version`, `rows`, `cols` as
//! little-endian `u32`, then `rows * cols` little-endian `f32` values in
//! row-major order. Every persisted matrix in the pipeline (features,
//! training sets, model parameters, bag-of-features tables) uses it.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DBOF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

pub fn encode(matrix: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = matrix.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * rows * cols);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(rows as u32).to_le_bytes());
    out.extend_from_slice(&(cols as u32).to_le_bytes());
    for &v in matrix.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<Array2<f64>> {
    let bad = |message: &str| Error::Format {
        path: origin.to_path_buf(),
        message: message.to_string(),
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 4 * rows * cols {
        return Err(bad(&format!(
            "expected {} data bytes for {rows}x{cols}, found {}",
            4 * rows * cols,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked above"))
}

pub fn write(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode(matrix))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?
        .read_to_end(&mut bytes)?;
    decode(&bytes, path)
}

/// Vectors are stored as single-row matrices.
pub fn write_vector(path: &Path, vector: &Array1<f64>) -> Result<()> {
    let row = vector.clone().insert_axis(ndarray::Axis(0));
    write(path, &row)
}

pub fn read_vector(path: &Path) -> Result<Array1<f64>> {
    let m = read(path)?;
    if m.nrows() != 1 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected a single-row vector, found {} rows", m.nrows()),
        });
    }
    Ok(m.row(0).to_owned())
}
