//! The cloud-server role: score encrypted subindexes against a trapdoor and
//! return ranked top-k results.
//!
//! This module sees only the encrypted artifacts — it deliberately imports
//! neither the secret key type nor any plaintext vector builder.

use std::cmp::Ordering;
use std::io::{BufReader, BufWriter, Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io;
use crate::knn::{EncryptedSubindex, Trapdoor};
use crate::{Real, Vector};

/// All subindexes of one outsourced corpus, sharing a single dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct EncryptedIndex<T: Real> {
    dim: usize,
    subindexes: Vec<EncryptedSubindex<T>>,
}

impl<T: Real> EncryptedIndex<T> {
    pub fn new(subindexes: Vec<EncryptedSubindex<T>>) -> Result<Self> {
        let dim = subindexes
            .first()
            .map(|s| s.left.len())
            .ok_or(Error::EmptyCorpus)?;
        let mut ids: Vec<&str> = Vec::with_capacity(subindexes.len());
        for s in &subindexes {
            if s.left.len() != dim || s.right.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: s.left.len().max(s.right.len()),
                });
            }
            ids.push(&s.doc_id);
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicateDocId("in encrypted index".into()));
        }
        Ok(EncryptedIndex { dim, subindexes })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.subindexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subindexes.is_empty()
    }

    pub fn subindexes(&self) -> &[EncryptedSubindex<T>] {
        &self.subindexes
    }

    /// Index file: magic, `n`, record count, then per record the doc id and
    /// the two `(n+1)`-vectors.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut w = BufWriter::new(w);
        io::write_magic(&mut w, io::INDEX_MAGIC)?;
        io::write_u32(&mut w, (self.dim - 1) as u32)?;
        io::write_u32(&mut w, self.len() as u32)?;
        for s in &self.subindexes {
            io::write_string(&mut w, &s.doc_id)?;
            io::write_f64_slice(&mut w, s.left.as_slice())?;
            io::write_f64_slice(&mut w, s.right.as_slice())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self> {
        let mut r = BufReader::new(r);
        io::expect_magic(&mut r, io::INDEX_MAGIC)?;
        let dim = io::read_u32(&mut r)? as usize + 1;
        let count = io::read_u32(&mut r)? as usize;
        let mut subindexes = Vec::with_capacity(count);
        for _ in 0..count {
            let doc_id = io::read_string(&mut r)?;
            let left = io::read_f64_vec(&mut r, dim)?;
            let right = io::read_f64_vec(&mut r, dim)?;
            subindexes.push(EncryptedSubindex {
                doc_id,
                left,
                right,
            });
        }
        EncryptedIndex::new(subindexes)
    }
}

/// Ranked `(doc_id, score)` pairs, scores non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResults<T: Real> {
    pub entries: Vec<(String, T)>,
}

impl<T: Real> RankedResults<T> {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "doc_id,score")?;
        for (id, score) in &self.entries {
            writeln!(w, "{id},{score}")?;
        }
        Ok(())
    }
}

/// Compensated (Neumaier) dot product; keeps the encrypted-vs-plaintext
/// score agreement inside tolerance even for large `r`, `t`.
fn dot_compensated<T: Real>(a: &Vector<T>, b: &Vector<T>) -> T {
    let mut sum = T::zero();
    let mut comp = T::zero();
    for i in 0..a.len() {
        let term = a[i] * b[i];
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Relevance score of one subindex against a trapdoor: the sum of the two
/// pairwise inner products.
pub fn score<T: Real>(subindex: &EncryptedSubindex<T>, trapdoor: &Trapdoor<T>) -> Result<T> {
    if subindex.left.len() != trapdoor.left.len() {
        return Err(Error::DimensionMismatch {
            expected: subindex.left.len(),
            actual: trapdoor.left.len(),
        });
    }
    Ok(dot_compensated(&subindex.left, &trapdoor.left)
        + dot_compensated(&subindex.right, &trapdoor.right))
}

fn rank_order<T: Real>(a: &(String, T), b: &(String, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .expect("scores are finite")
        .then_with(|| a.0.cmp(&b.0))
}

/// Score every subindex and return the `k` best documents, ties broken by
/// ascending doc id. Linear scan; per-document scoring is parallel.
pub fn top_k<T: Real + Send + Sync>(
    index: &EncryptedIndex<T>,
    trapdoor: &Trapdoor<T>,
    k: usize,
) -> Result<RankedResults<T>> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if index.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut scored: Vec<(String, T)> = index
        .subindexes
        .par_iter()
        .map(|s| Ok((s.doc_id.clone(), score(s, trapdoor)?)))
        .collect::<Result<_>>()?;
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(RankedResults { entries: scored })
}

/// Sequential variant for single-threaded benchmarking.
pub fn top_k_sequential<T: Real>(
    index: &EncryptedIndex<T>,
    trapdoor: &Trapdoor<T>,
    k: usize,
) -> Result<RankedResults<T>> {
    if k == 0 {
        return Err(Error::InvalidParam("k must be >= 1".into()));
    }
    if index.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut scored: Vec<(String, T)> = index
        .subindexes
        .iter()
        .map(|s| Ok((s.doc_id.clone(), score(s, trapdoor)?)))
        .collect::<Result<_>>()?;
    scored.sort_by(rank_order);
    scored.truncate(k);
    Ok(RankedResults { entries: scored })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::{
        encrypt_index, gen_trapdoor_with, keygen, SecretKey, PAYLOAD_KEY_LEN,
    };
    use crate::Matrix;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn transparent_key(dim: usize) -> SecretKey<f64> {
        SecretKey::from_parts(
            vec![false; dim],
            Matrix::identity(dim, dim),
            Matrix::identity(dim, dim),
            [0u8; PAYLOAD_KEY_LEN],
        )
        .unwrap()
    }

    #[test]
    fn perfect_match_scores_two() {
        // Transparent key, r = 1, t = 0, d1 = q1, d2 = q2 unit vectors:
        // both cosines are 1.
        let key = transparent_key(6);
        let d1 = Vector::from_vec(vec![0.6, 0.8, 0.0]);
        let d2 = Vector::from_vec(vec![0.0, 1.0]);
        let sub = encrypt_index("d", &d1, &d2, &key, &mut rng(1)).unwrap();
        let td = gen_trapdoor_with(&d1, &d2, 1.0, 0.0, &key, &mut rng(2)).unwrap();
        assert_relative_eq!(score(&sub, &td).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn orthogonal_vectors_score_zero() {
        let key = transparent_key(6);
        let d1 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let q1 = Vector::from_vec(vec![0.0, 1.0, 0.0]);
        let d2 = Vector::from_vec(vec![1.0, 0.0]);
        let q2 = Vector::from_vec(vec![0.0, 1.0]);
        let sub = encrypt_index("d", &d1, &d2, &key, &mut rng(3)).unwrap();
        let td = gen_trapdoor_with(&q1, &q2, 3.5, 0.0, &key, &mut rng(4)).unwrap();
        assert_relative_eq!(score(&sub, &td).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn random_instance_matches_plaintext_oracle() {
        let mut r = rng(5);
        let key = keygen::<f64>(8, &mut r).unwrap();
        for _ in 0..50 {
            let d1 = Vector::from_fn(5, |_, _| r.random_range(-1.0..1.0)).normalize();
            let d2 = Vector::from_fn(3, |_, _| r.random_range(-1.0..1.0)).normalize();
            let q1 = Vector::from_fn(5, |_, _| r.random_range(-1.0..1.0)).normalize();
            let q2 = Vector::from_fn(3, |_, _| r.random_range(-1.0..1.0)).normalize();
            let rr = r.random_range(0.01..100.0);
            let tt = r.random_range(-100.0..100.0);
            let sub = encrypt_index("d", &d1, &d2, &key, &mut r).unwrap();
            let td = gen_trapdoor_with(&q1, &q2, rr, tt, &key, &mut r).unwrap();
            let oracle = rr * (d1.dot(&q1) + d2.dot(&q2)) + tt;
            assert_relative_eq!(score(&sub, &td).unwrap(), oracle, epsilon = 1e-6);
        }
    }

    #[test]
    fn score_is_linear_in_trapdoor_scale() {
        let mut r = rng(6);
        let key = keygen::<f64>(5, &mut r).unwrap();
        let d1 = Vector::from_vec(vec![0.6, 0.8, 0.0]);
        let d2 = Vector::from_vec(vec![1.0, 0.0]);
        let sub = encrypt_index("d", &d1, &d2, &key, &mut r).unwrap();
        let td = gen_trapdoor_with(&d1, &d2, 2.0, 1.0, &key, &mut r).unwrap();
        let scaled = Trapdoor {
            left: &td.left * 3.0,
            right: &td.right * 3.0,
        };
        assert_relative_eq!(
            score(&sub, &scaled).unwrap(),
            3.0 * score(&sub, &td).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_document_index() {
        let key = transparent_key(6);
        let d1 = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let d2 = Vector::from_vec(vec![0.0, 1.0]);
        let sub = encrypt_index("only", &d1, &d2, &key, &mut rng(7)).unwrap();
        let index = EncryptedIndex::new(vec![sub]).unwrap();
        let td = gen_trapdoor_with(&d1, &d2, 1.0, 0.0, &key, &mut rng(8)).unwrap();
        let res = top_k(&index, &td, 100).unwrap();
        assert_eq!(res.entries.len(), 1);
        assert_eq!(res.entries[0].0, "only");
    }

    #[test]
    fn engineered_scores_rank_in_order() {
        let key = transparent_key(4);
        let q1 = Vector::from_vec(vec![1.0, 0.0]);
        let q2 = Vector::from_vec(vec![1.0]);
        let docs = [
            ("low", Vector::from_vec(vec![0.0, 1.0]), Vector::from_vec(vec![-1.0])),
            ("high", q1.clone(), q2.clone()),
            ("mid", Vector::from_vec(vec![1.0, 0.0]), Vector::from_vec(vec![0.0])),
        ];
        let mut r = rng(9);
        let subs = docs
            .iter()
            .map(|(id, d1, d2)| encrypt_index(id, d1, d2, &key, &mut r).unwrap())
            .collect();
        let index = EncryptedIndex::new(subs).unwrap();
        let td = gen_trapdoor_with(&q1, &q2, 1.0, 0.0, &key, &mut r).unwrap();
        let res = top_k(&index, &td, 2).unwrap();
        let ids: Vec<_> = res.entries.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["high", "mid"]);
        assert!(res.entries[0].1 >= res.entries[1].1);
    }

    #[test]
    fn identical_documents_tie_break_by_doc_id() {
        let key = transparent_key(4);
        let d1 = Vector::from_vec(vec![1.0, 0.0]);
        let d2 = Vector::from_vec(vec![1.0]);
        let mut r = rng(10);
        let subs = ["c", "a", "b"]
            .iter()
            .map(|id| encrypt_index(id, &d1, &d2, &key, &mut r).unwrap())
            .collect();
        let index = EncryptedIndex::new(subs).unwrap();
        let td = gen_trapdoor_with(&d1, &d2, 1.0, 0.0, &key, &mut r).unwrap();
        let res = top_k(&index, &td, 3).unwrap();
        let ids: Vec<_> = res.entries.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn empty_index_is_rejected() {
        assert!(EncryptedIndex::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn duplicate_doc_ids_rejected() {
        let key = transparent_key(4);
        let d1 = Vector::from_vec(vec![1.0, 0.0]);
        let d2 = Vector::from_vec(vec![1.0]);
        let mut r = rng(11);
        let subs = vec![
            encrypt_index("a", &d1, &d2, &key, &mut r).unwrap(),
            encrypt_index("a", &d1, &d2, &key, &mut r).unwrap(),
        ];
        assert!(EncryptedIndex::new(subs).is_err());
    }

    #[test]
    fn index_round_trips_through_binary() {
        let mut r = rng(12);
        let key = keygen::<f64>(5, &mut r).unwrap();
        let subs = (0..4)
            .map(|i| {
                let d1 = Vector::from_fn(3, |_, _| r.random_range(-1.0..1.0)).normalize();
                let d2 = Vector::from_fn(2, |_, _| r.random_range(-1.0..1.0)).normalize();
                encrypt_index(&format!("d{i}"), &d1, &d2, &key, &mut r).unwrap()
            })
            .collect();
        let index = EncryptedIndex::new(subs).unwrap();
        let mut buf = Vec::new();
        index.save(&mut buf).unwrap();
        let loaded = EncryptedIndex::<f64>::load(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, index);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let key = transparent_key(4);
        let d1 = Vector::from_vec(vec![1.0, 0.0]);
        let d2 = Vector::from_vec(vec![1.0]);
        let sub = encrypt_index("a", &d1, &d2, &key, &mut rng(13)).unwrap();
        let td = Trapdoor {
            left: Vector::zeros(5),
            right: Vector::zeros(5),
        };
        assert!(score(&sub, &td).is_err());
    }
}
