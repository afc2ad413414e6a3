//! `FQTN` tensor files: magic, `u16` version, `T: u64`, `d: u32`, then
//! `T × d` little-endian f32 values in row-major order.

use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::points::PointSet;
use crate::wire::{byte_len, version, Reader};

pub const TENSOR_MAGIC: [u8; 4] = *b"FQTN";
pub const TENSOR_VERSION: u16 = 1;
pub const TENSOR_HEADER_BYTES: usize = 4 + 2 + 8 + 4;

/// Rows are stored as f32; values outside its range become infinite.
pub fn tensor_to_bytes(rows: &PointSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(TENSOR_HEADER_BYTES + 4 * rows.as_slice().len());
    out.extend_from_slice(&TENSOR_MAGIC);
    out.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(rows.dim() as u32).to_le_bytes());
    for &v in rows.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn tensor_from_bytes(bytes: &[u8]) -> Result<PointSet> {
    let mut r = Reader::new(bytes);
    r.magic(TENSOR_MAGIC)?;
    version(r.u16()?, TENSOR_VERSION)?;
    let t = r.u64()?;
    let d = r.u32()?;
    if d == 0 {
        return Err(FormatError::Malformed("tensor dimension 0".into()).into());
    }
    let len = byte_len(t, 4 * d as u64)?;
    let raw = r.take(len)?;
    if r.remaining() != 0 {
        return Err(FormatError::Malformed(format!("{} trailing bytes", r.remaining())).into());
    }
    let data = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    PointSet::new(d as usize, data)
}

pub fn write_tensor(path: impl AsRef<Path>, rows: &PointSet) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, tensor_to_bytes(rows)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<PointSet> {
    let path = path.as_ref();
    tensor_from_bytes(&std::fs::read(path).map_err(|e| Error::io(path, e))?)
}
