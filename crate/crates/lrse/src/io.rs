//! Little-endian binary primitives shared by the on-disk artifact formats.
//!
//! Every artifact starts with an 8-byte magic tag. Floats are always stored
//! as 64-bit regardless of the in-memory scalar type.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::{Matrix, Real, Vector};

pub const KEY_MAGIC: &[u8; 8] = b"LRSEKEY1";
pub const INDEX_MAGIC: &[u8; 8] = b"LRSEIDX1";
pub const TRAPDOOR_MAGIC: &[u8; 8] = b"LRSETRP1";
pub const MATRIX_MAGIC: &[u8; 8] = b"LRSEMAT1";
pub const SVD_MAGIC: &[u8; 8] = b"LRSESVD1";
pub const BUNDLE_MAGIC: &[u8; 8] = b"LRSESKB1";
pub const PAYLOAD_MAGIC: &[u8; 8] = b"LRSEPAY1";

pub fn write_magic<W: Write>(w: &mut W, magic: &[u8; 8]) -> Result<()> {
    w.write_all(magic)?;
    Ok(())
}

pub fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&buf)
        )));
    }
    Ok(())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_u32::<LittleEndian>(v)?;
    Ok(())
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(r.read_u32::<LittleEndian>()?)
}

pub fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("non-utf8 string: {e}")))
}

pub fn write_bytes<W: Write>(w: &mut W, b: &[u8]) -> Result<()> {
    write_u32(w, b.len() as u32)?;
    w.write_all(b)?;
    Ok(())
}

pub fn read_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn write_f64_slice<W: Write, T: Real>(w: &mut W, values: &[T]) -> Result<()> {
    for v in values {
        w.write_f64::<LittleEndian>(v.into_f64())?;
    }
    Ok(())
}

pub fn read_f64_vec<R: Read, T: Real>(r: &mut R, len: usize) -> Result<Vector<T>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(T::of_f64(r.read_f64::<LittleEndian>()?));
    }
    Ok(Vector::from_vec(out))
}

/// Column-major matrix payload (dims are written by the caller).
pub fn write_matrix<W: Write, T: Real>(w: &mut W, m: &Matrix<T>) -> Result<()> {
    write_f64_slice(w, m.as_slice())
}

pub fn read_matrix<R: Read, T: Real>(r: &mut R, rows: usize, cols: usize) -> Result<Matrix<T>> {
    let data = read_f64_vec::<_, T>(r, rows * cols)?;
    Ok(Matrix::from_vec(rows, cols, data.as_slice().to_vec()))
}
