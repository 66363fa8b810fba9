//! Split-and-transform secure kNN core: key generation, the two splitting
//! processes, subindex encryption, trapdoor generation, the trapdoor
//! collision bound, and the opaque payload cipher.
//!
//! All randomness flows through a caller-supplied RNG so every artifact is
//! reproducible from a seed.

use std::io::{BufReader, BufWriter, Read, Write};

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use rand::Rng;

use crate::error::{Error, Result};
use crate::io;
use crate::{Matrix, Real, Vector};

/// Condition-number cap enforced at key generation.
pub const MAX_CONDITION: f64 = 1e6;
/// Resampling budget for drawing a well-conditioned invertible matrix.
pub const MAX_KEYGEN_ATTEMPTS: usize = 100;
/// Worst inverse defect `max |M M^{-1} - I|` tolerated at generation time.
pub const MAX_INVERSE_DEFECT: f64 = 1e-8;

/// Default bounds for the trapdoor randomness `r in (0, r_max]`,
/// `t in [-t_max, t_max]`.
pub const DEFAULT_R_MAX: f64 = 1000.0;
pub const DEFAULT_T_MAX: f64 = 1000.0;
/// `r` is rejected below this fraction of `r_max` to keep score scaling
/// non-degenerate.
pub const R_MIN_FRACTION: f64 = 1e-6;

pub const PAYLOAD_KEY_LEN: usize = 32;
pub const PAYLOAD_NONCE_LEN: usize = 12;

/// Secret key: splitting indicator `S`, the invertible transform pair with
/// cached inverses, and the opaque symmetric payload key.
#[derive(Debug, Clone, PartialEq)]
pub struct SecretKey<T: Real> {
    s: Vec<bool>,
    m1: Matrix<T>,
    m2: Matrix<T>,
    m1_inv: Matrix<T>,
    m2_inv: Matrix<T>,
    payload_key: [u8; PAYLOAD_KEY_LEN],
}

impl<T: Real> SecretKey<T> {
    /// `n + 1`.
    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn n(&self) -> usize {
        self.dim() - 1
    }

    pub fn indicator(&self) -> &[bool] {
        &self.s
    }

    pub fn payload_key(&self) -> &[u8; PAYLOAD_KEY_LEN] {
        &self.payload_key
    }

    /// Test/bench constructor from explicit parts; validates the inverses.
    pub fn from_parts(
        s: Vec<bool>,
        m1: Matrix<T>,
        m2: Matrix<T>,
        payload_key: [u8; PAYLOAD_KEY_LEN],
    ) -> Result<Self> {
        let dim = s.len();
        for m in [&m1, &m2] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.nrows(),
                });
            }
        }
        let m1_inv = invert_checked(&m1)?;
        let m2_inv = invert_checked(&m2)?;
        Ok(SecretKey {
            s,
            m1,
            m2,
            m1_inv,
            m2_inv,
            payload_key,
        })
    }

    /// Binary key file: magic, `n`, `S` packed as bits, the four matrices as
    /// 64-bit floats, payload key bytes.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut w = BufWriter::new(w);
        io::write_magic(&mut w, io::KEY_MAGIC)?;
        io::write_u32(&mut w, self.n() as u32)?;
        let mut packed = vec![0u8; self.dim().div_ceil(8)];
        for (i, &bit) in self.s.iter().enumerate() {
            if bit {
                packed[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&packed)?;
        for m in [&self.m1, &self.m2, &self.m1_inv, &self.m2_inv] {
            io::write_matrix(&mut w, m)?;
        }
        io::write_bytes(&mut w, &self.payload_key)?;
        w.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut r = BufReader::new(r);
        io::expect_magic(&mut r, io::KEY_MAGIC)?;
        let n = io::read_u32(&mut r)? as usize;
        let dim = n + 1;
        let mut packed = vec![0u8; dim.div_ceil(8)];
        r.read_exact(&mut packed)?;
        let s = (0..dim).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
        let m1 = io::read_matrix(&mut r, dim, dim)?;
        let m2 = io::read_matrix(&mut r, dim, dim)?;
        let m1_inv = io::read_matrix(&mut r, dim, dim)?;
        let m2_inv = io::read_matrix(&mut r, dim, dim)?;
        let key_bytes = io::read_bytes(&mut r)?;
        let payload_key = key_bytes
            .try_into()
            .map_err(|_| Error::Format("payload key has wrong length".into()))?;
        Ok(SecretKey {
            s,
            m1,
            m2,
            m1_inv,
            m2_inv,
            payload_key,
        })
    }
}

/// Plain `(n+1)`-dimensional document vector `(d1 | d2 | 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlainDocumentVector<T: Real>(pub Vector<T>);

impl<T: Real> PlainDocumentVector<T> {
    pub fn new(d1: &Vector<T>, d2: &Vector<T>) -> Self {
        let mut v = Vec::with_capacity(d1.len() + d2.len() + 1);
        v.extend_from_slice(d1.as_slice());
        v.extend_from_slice(d2.as_slice());
        v.push(T::one());
        PlainDocumentVector(Vector::from_vec(v))
    }
}

/// Encrypted per-document vector pair `{M1^T D', M2^T D''}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedSubindex<T: Real> {
    pub doc_id: String,
    pub left: Vector<T>,
    pub right: Vector<T>,
}

/// Encrypted query vector pair `{M1^{-1} Q', M2^{-1} Q''}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trapdoor<T: Real> {
    pub left: Vector<T>,
    pub right: Vector<T>,
}

impl<T: Real> Trapdoor<T> {
    pub fn dim(&self) -> usize {
        self.left.len()
    }

    /// Trapdoor file: magic, `n`, then the two `(n+1)`-vectors.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut w = BufWriter::new(w);
        io::write_magic(&mut w, io::TRAPDOOR_MAGIC)?;
        io::write_u32(&mut w, (self.dim() - 1) as u32)?;
        io::write_f64_slice(&mut w, self.left.as_slice())?;
        io::write_f64_slice(&mut w, self.right.as_slice())?;
        w.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut r = BufReader::new(r);
        io::expect_magic(&mut r, io::TRAPDOOR_MAGIC)?;
        let dim = io::read_u32(&mut r)? as usize + 1;
        let left = io::read_f64_vec(&mut r, dim)?;
        let right = io::read_f64_vec(&mut r, dim)?;
        Ok(Trapdoor { left, right })
    }
}

/// Fixed bytes before the two vectors in a trapdoor file.
pub const TRAPDOOR_HEADER_BYTES: usize = 8 + 4;

fn sample_uniform<T: Real>(rng: &mut impl Rng, lo: f64, hi: f64) -> T {
    T::of_f64(rng.random_range(lo..=hi))
}

fn condition_number<T: Real>(m: &Matrix<T>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max().into_f64();
    let min = sv.min().into_f64();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn invert_checked<T: Real>(m: &Matrix<T>) -> Result<Matrix<T>> {
    let inv = m
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Keygen("matrix is singular".into()))?;
    let defect = (m * &inv - Matrix::identity(m.nrows(), m.ncols())).amax();
    if defect.into_f64() > MAX_INVERSE_DEFECT {
        return Err(Error::Keygen(format!("inverse defect {defect} too large")));
    }
    Ok(inv)
}

fn sample_invertible<T: Real>(dim: usize, rng: &mut impl Rng) -> Result<(Matrix<T>, Matrix<T>)> {
    for _ in 0..MAX_KEYGEN_ATTEMPTS {
        let m = Matrix::from_fn(dim, dim, |_, _| sample_uniform(rng, -1.0, 1.0));
        if condition_number(&m) > MAX_CONDITION {
            continue;
        }
        if let Ok(inv) = invert_checked(&m) {
            return Ok((m, inv));
        }
    }
    Err(Error::Keygen(format!(
        "no invertible matrix with condition <= {MAX_CONDITION} in {MAX_KEYGEN_ATTEMPTS} attempts"
    )))
}

/// Generate a fresh secret key for vector dimension `n + 1` (`n >= 2`).
pub fn keygen<T: Real>(n: usize, rng: &mut impl Rng) -> Result<SecretKey<T>> {
    if n < 2 {
        return Err(Error::InvalidParam(format!("dimension n = {n} < 2")));
    }
    let dim = n + 1;
    let s = (0..dim).map(|_| rng.random::<bool>()).collect();
    let (m1, m1_inv) = sample_invertible(dim, rng)?;
    let (m2, m2_inv) = sample_invertible(dim, rng)?;
    let mut payload_key = [0u8; PAYLOAD_KEY_LEN];
    rng.fill_bytes(&mut payload_key);
    Ok(SecretKey {
        s,
        m1,
        m2,
        m1_inv,
        m2_inv,
        payload_key,
    })
}

fn split_bound<T: Real>(v: &Vector<T>) -> f64 {
    (2.0 * v.amax().into_f64()).max(1.0)
}

fn check_len<T: Real>(v: &Vector<T>, s: &[bool]) -> Result<()> {
    if v.len() != s.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            actual: v.len(),
        });
    }
    Ok(())
}

/// Index-side split: where `S[m] = 1` the component is shared into two
/// random addends, elsewhere both halves copy the component.
pub fn split_index<T: Real>(
    d: &Vector<T>,
    s: &[bool],
    rng: &mut impl Rng,
) -> Result<(Vector<T>, Vector<T>)> {
    check_len(d, s)?;
    let bound = split_bound(d);
    let mut left = d.clone();
    let mut right = d.clone();
    for m in 0..d.len() {
        if s[m] {
            let a: T = sample_uniform(rng, -bound, bound);
            left[m] = a;
            right[m] = d[m] - a;
        }
    }
    Ok((left, right))
}

/// Query-side split: the dual of [`split_index`] with the indicator
/// condition inverted (`S[m] = 0` positions are shared).
pub fn split_query<T: Real>(
    q: &Vector<T>,
    s: &[bool],
    rng: &mut impl Rng,
) -> Result<(Vector<T>, Vector<T>)> {
    check_len(q, s)?;
    let bound = split_bound(q);
    let mut left = q.clone();
    let mut right = q.clone();
    for m in 0..q.len() {
        if !s[m] {
            let a: T = sample_uniform(rng, -bound, bound);
            left[m] = a;
            right[m] = q[m] - a;
        }
    }
    Ok((left, right))
}

/// Build the encrypted subindex `{M1^T D', M2^T D''}` for one document.
pub fn encrypt_index<T: Real>(
    doc_id: &str,
    d1: &Vector<T>,
    d2: &Vector<T>,
    key: &SecretKey<T>,
    rng: &mut impl Rng,
) -> Result<EncryptedSubindex<T>> {
    let plain = PlainDocumentVector::new(d1, d2);
    check_len(&plain.0, &key.s)?;
    let (left, right) = split_index(&plain.0, &key.s, rng)?;
    Ok(EncryptedSubindex {
        doc_id: doc_id.to_string(),
        left: key.m1.tr_mul(&left),
        right: key.m2.tr_mul(&right),
    })
}

/// Bounds for the per-trapdoor randomness.
#[derive(Debug, Clone, Copy)]
pub struct TrapdoorParams {
    pub r_max: f64,
    pub t_max: f64,
}

impl Default for TrapdoorParams {
    fn default() -> Self {
        TrapdoorParams {
            r_max: DEFAULT_R_MAX,
            t_max: DEFAULT_T_MAX,
        }
    }
}

/// Generate a trapdoor with explicit `r > 0` and `t` (the random extension
/// of the query vector). Used directly by tests that need the plaintext
/// oracle; [`gen_trapdoor`] samples `r` and `t` and delegates here.
pub fn gen_trapdoor_with<T: Real>(
    q1: &Vector<T>,
    q2: &Vector<T>,
    r: T,
    t: T,
    key: &SecretKey<T>,
    rng: &mut impl Rng,
) -> Result<Trapdoor<T>> {
    if r <= T::zero() {
        return Err(Error::InvalidParam("trapdoor scale r must be > 0".into()));
    }
    let mut q = Vec::with_capacity(q1.len() + q2.len() + 1);
    q.extend(q1.iter().map(|&x| r * x));
    q.extend(q2.iter().map(|&x| r * x));
    q.push(t);
    let q = Vector::from_vec(q);
    check_len(&q, &key.s)?;
    let (left, right) = split_query(&q, &key.s, rng)?;
    Ok(Trapdoor {
        left: &key.m1_inv * left,
        right: &key.m2_inv * right,
    })
}

/// Generate a trapdoor for the query pair `(q1, q2)` with fresh `r` and `t`.
pub fn gen_trapdoor<T: Real>(
    q1: &Vector<T>,
    q2: &Vector<T>,
    key: &SecretKey<T>,
    params: TrapdoorParams,
    rng: &mut impl Rng,
) -> Result<Trapdoor<T>> {
    let r_min = R_MIN_FRACTION * params.r_max;
    let r = loop {
        let candidate = rng.random_range(0.0..=params.r_max);
        if candidate >= r_min {
            break T::of_f64(candidate);
        }
    };
    let t = sample_uniform(rng, -params.t_max, params.t_max);
    gen_trapdoor_with(q1, q2, r, t, key, rng)
}

/// `log2` of the probability that two trapdoors for the same query collide:
/// `P = 1 / (alpha * 2^(dr + dt + mu*dq))`.
pub fn unlinkability_bound(
    alpha: u64,
    mu: u64,
    delta_q: u64,
    delta_r: u64,
    delta_t: u64,
) -> Result<f64> {
    if alpha == 0 {
        return Err(Error::InvalidParam("alpha must be >= 1".into()));
    }
    Ok(-((alpha as f64).log2() + (delta_r + delta_t + mu * delta_q) as f64))
}

/// Authenticated payload encryption (ChaCha20-Poly1305). The nonce must be
/// unique per (key, plaintext); callers derive it from the record index.
pub fn encrypt_payload(
    plaintext: &[u8],
    key: &[u8; PAYLOAD_KEY_LEN],
    nonce: &[u8; PAYLOAD_NONCE_LEN],
) -> Result<Vec<u8>> {
    let cipher = ChaCha20Poly1305::new(key.into());
    cipher
        .encrypt(Nonce::from_slice(nonce), plaintext)
        .map_err(|e| Error::Crypto(e.to_string()))
}

pub fn decrypt_payload(
    ciphertext: &[u8],
    key: &[u8; PAYLOAD_KEY_LEN],
    nonce: &[u8; PAYLOAD_NONCE_LEN],
) -> Result<Vec<u8>> {
    let cipher = ChaCha20Poly1305::new(key.into());
    cipher
        .decrypt(Nonce::from_slice(nonce), ciphertext)
        .map_err(|_| Error::Crypto("authentication failed".into()))
}
