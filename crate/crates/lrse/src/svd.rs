//! Truncated SVD of the keyword-document matrix and projection of term
//! vectors into the concept space.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::io;
use crate::{Matrix, Real, Vector};

/// Default concept count, mid-range of the usual [200, 500].
pub const DEFAULT_CONCEPTS: usize = 300;

/// Singular values below `SIGMA_FLOOR_REL * sigma_1` are treated as zero and
/// dropped instead of inverted.
pub const SIGMA_FLOOR_REL: f64 = 1e-10;

/// Projections whose pre-normalization norm falls below this yield the zero
/// vector.
pub const EPS_ZERO: f64 = 1e-12;

/// Truncated factors `U`, `S`, `V` of the keyword-document matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdModel<T: Real> {
    /// `t × n1`, orthonormal columns.
    pub u: Matrix<T>,
    /// Singular values, strictly positive and non-increasing.
    pub s: Vector<T>,
    /// `|D| × n1`, orthonormal columns.
    pub v: Matrix<T>,
}

impl<T: Real> SvdModel<T> {
    /// Effective concept count (may be smaller than requested on
    /// rank-deficient input).
    pub fn concepts(&self) -> usize {
        self.s.len()
    }

    pub fn term_count(&self) -> usize {
        self.u.nrows()
    }

    pub fn doc_count(&self) -> usize {
        self.v.nrows()
    }

    /// Project a term-space vector into the concept space:
    /// `d^T U S^{-1}`, then normalized to unit length (zero stays zero).
    pub fn project(&self, term_vector: &Vector<T>) -> Result<Vector<T>> {
        if term_vector.len() != self.term_count() {
            return Err(Error::DimensionMismatch {
                expected: self.term_count(),
                actual: term_vector.len(),
            });
        }
        let mut p = self.u.tr_mul(term_vector);
        for i in 0..p.len() {
            p[i] /= self.s[i];
        }
        let norm = p.norm();
        if norm.into_f64() < EPS_ZERO {
            return Ok(Vector::zeros(self.concepts()));
        }
        Ok(p / norm)
    }

    /// Binary layout: dims `t`, `n1`, `|D|`, then `U`, `S`, `V` as 64-bit
    /// floats (column-major). No internal buffering: the model can be
    /// embedded mid-stream in a larger artifact, so the reader must not
    /// consume past the model's own bytes.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        io::write_magic(w, io::SVD_MAGIC)?;
        io::write_u32(w, self.term_count() as u32)?;
        io::write_u32(w, self.concepts() as u32)?;
        io::write_u32(w, self.doc_count() as u32)?;
        io::write_matrix(w, &self.u)?;
        io::write_f64_slice(w, self.s.as_slice())?;
        io::write_matrix(w, &self.v)?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        io::expect_magic(r, io::SVD_MAGIC)?;
        let t = io::read_u32(r)? as usize;
        let n1 = io::read_u32(r)? as usize;
        let d = io::read_u32(r)? as usize;
        let u = io::read_matrix(r, t, n1)?;
        let s = io::read_f64_vec(r, n1)?;
        let v = io::read_matrix(r, d, n1)?;
        Ok(SvdModel { u, s, v })
    }
}

/// Top-`n1` singular triplets of `a`. Singular values below the relative
/// floor are dropped, shrinking the effective concept count.
pub fn truncated_svd<T: Real>(a: &Matrix<T>, n1: usize) -> Result<SvdModel<T>> {
    let max_rank = a.nrows().min(a.ncols());
    if n1 < 1 || n1 > max_rank {
        return Err(Error::InvalidRank { n1, max: max_rank });
    }
    let svd = a.clone().svd(true, true);
    let u_full = svd.u.expect("u requested");
    let vt_full = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;

    let floor = T::of_f64(SIGMA_FLOOR_REL) * sigma[0];
    let keep = (0..n1.min(sigma.len()))
        .take_while(|&i| sigma[i] > floor && sigma[i] > T::zero())
        .count();
    if keep == 0 {
        return Err(Error::InvalidRank { n1, max: 0 });
    }

    Ok(SvdModel {
        u: u_full.columns(0, keep).into_owned(),
        s: Vector::from_iterator(keep, (0..keep).map(|i| sigma[i])),
        v: vt_full.rows(0, keep).transpose(),
    })
}
