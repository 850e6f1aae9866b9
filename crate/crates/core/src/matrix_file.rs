//! `TWRM` binary matrix files.
//!
//! Layout, all little-endian:
//!
//! | bytes  | field                                   |
//! |--------|-----------------------------------------|
//! | 0..4   | magic `TWRM`                            |
//! | 4..8   | version (`u32`, currently 1)            |
//! | 8..12  | dtype tag (`u32`, 1 = complex128)       |
//! | 12..20 | rows (`u64`)                            |
//! | 20..28 | cols (`u64`)                            |
//! | 28..32 | row-major flag (`u32`, 0 or 1)          |
//! | 32..36 | CRC-32 of bytes 0..32                   |
//! | 36..   | `rows * cols` pairs of `f64` (re, im)   |
//!
//! Writers emit column-major payloads; readers accept both orders.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

pub const MAGIC: &[u8; 4] = b"TWRM";
pub const VERSION: u32 = 1;
pub const DTYPE_COMPLEX128: u32 = 1;
pub const HEADER_LEN: usize = 36;

fn header(rows: usize, cols: usize, row_major: bool) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(MAGIC);
    h.extend_from_slice(&VERSION.to_le_bytes());
    h.extend_from_slice(&DTYPE_COMPLEX128.to_le_bytes());
    h.extend_from_slice(&(rows as u64).to_le_bytes());
    h.extend_from_slice(&(cols as u64).to_le_bytes());
    h.extend_from_slice(&u32::from(row_major).to_le_bytes());
    let crc = crc32fast::hash(&h);
    h.extend_from_slice(&crc.to_le_bytes());
    h
}

/// Serialises `a` with a column-major payload.
pub fn encode(a: &CMatrix) -> Vec<u8> {
    let mut out = header(a.nrows(), a.ncols(), false);
    out.reserve(a.len() * 16);
    for z in a.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

pub fn decode(bytes: &[u8]) -> Result<CMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not a TWRM file".into()));
    }
    let crc = crc32fast::hash(&bytes[..32]);
    if crc != u32_at(bytes, 32) {
        return Err(Error::Format("header checksum mismatch".into()));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dtype = u32_at(bytes, 8);
    if dtype != DTYPE_COMPLEX128 {
        return Err(Error::Format(format!("unsupported dtype tag {dtype}")));
    }
    let rows = usize::try_from(u64_at(bytes, 12)).map_err(|_| Error::Format("row count overflow".into()))?;
    let cols = usize::try_from(u64_at(bytes, 20)).map_err(|_| Error::Format("column count overflow".into()))?;
    let row_major = match u32_at(bytes, 28) {
        0 => false,
        1 => true,
        f => return Err(Error::Format(format!("invalid row-major flag {f}"))),
    };
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(16))
        .ok_or_else(|| Error::Format("payload size overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Format(format!(
            "payload is {} bytes, expected {expected} for {rows}x{cols}",
            payload.len()
        )));
    }
    let at = |k: usize| C64::new(f64_at(payload, 16 * k), f64_at(payload, 16 * k + 8));
    Ok(if row_major {
        CMatrix::from_fn(rows, cols, |i, j| at(i * cols + j))
    } else {
        CMatrix::from_fn(rows, cols, |i, j| at(j * rows + i))
    })
}

pub fn write_matrix(path: &Path, a: &CMatrix) -> Result<()> {
    std::fs::write(path, encode(a))?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<CMatrix> {
    decode(&std::fs::read(path)?)
}
