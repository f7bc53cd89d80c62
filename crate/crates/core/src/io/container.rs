//! Binary containers for tensors (`T3D1`) and matrices (`M2D1`).
//!
//! Layout: 4-byte magic, little-endian `u64` dims, then little-endian
//! IEEE-754 `f64` values. Tensors are slice-major and row-major within a
//! slice; matrices are row-major.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor3};

pub const TENSOR_MAGIC: &[u8; 4] = b"T3D1";
pub const MATRIX_MAGIC: &[u8; 4] = b"M2D1";

fn read_header<'a, const N: usize>(bytes: &'a [u8], magic: &[u8; 4]) -> Result<([usize; N], &'a [u8])> {
    let header_len = 4 + 8 * N;
    if bytes.len() < header_len {
        return Err(Error::Format(format!("{} bytes is shorter than the {header_len}-byte header", bytes.len())));
    }
    if &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&bytes[..4]),
            String::from_utf8_lossy(magic)
        )));
    }
    let mut dims = [0usize; N];
    for (d, chunk) in dims.iter_mut().zip(bytes[4..header_len].chunks_exact(8)) {
        let raw = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        *d = usize::try_from(raw).map_err(|_| Error::Format(format!("dimension {raw} too large")))?;
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let payload = &bytes[header_len..];
    if payload.len() != count {
        return Err(Error::Format(format!("dims {dims:?} need {count} payload bytes, found {}", payload.len())));
    }
    Ok((dims, payload))
}

fn decode_values(payload: &[u8]) -> Vec<f64> {
    payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect()
}

pub fn encode_tensor(t: &Tensor3) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + 8 * t.len());
    out.extend_from_slice(TENSOR_MAGIC);
    for d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in t.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    let (dims, payload) = read_header::<3>(bytes, TENSOR_MAGIC)?;
    Tensor3::from_vec(dims, decode_values(payload)).map_err(|e| Error::Format(e.to_string()))
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let (rows, cols) = m.shape();
    let mut out = Vec::with_capacity(20 + 8 * (rows * cols));
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(cols as u64).to_le_bytes());
    for i in 0..rows {
        for j in 0..cols {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

/// Matrices may have a zero dimension (an empty view).
pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let ([rows, cols], payload) = read_header::<2>(bytes, MATRIX_MAGIC)?;
    Ok(Matrix::from_row_slice(rows, cols, &decode_values(payload)))
}

pub fn write_tensor(path: &Path, t: &Tensor3) -> Result<()> {
    fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<Tensor3> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}
