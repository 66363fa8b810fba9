//! Lightweight ranked searchable encryption over document collections.
//!
//! A data owner builds two low-dimensional representations per document — a
//! concept vector obtained by projecting its TF×IDF column through a truncated
//! SVD, and a TF×IDF-weighted centroid of pretrained word embeddings — glues
//! them into an `(n+1)`-dimensional plain vector, and encrypts it with the
//! split-and-transform secure kNN construction. A data user turns query
//! keywords into a trapdoor the same way (with fresh randomness `r > 0` and
//! `t` per trapdoor); the cloud server scores subindex/trapdoor pairs by two
//! inner products and returns the top-k documents without ever seeing a
//! plaintext vector.
//!
//! The crate also ships the evaluation side: NDCG@k over graded relevance
//! judgments, keyword-count and TF×IDF cosine baselines, and a benchmark
//! harness for the system-cost trends (index build, trapdoor generation,
//! query scoring, artifact sizes).
//!
//! All numeric code is generic over [`Real`]; `f64`-concrete aliases live at
//! the crate root and are what the CLI and the on-disk formats use.

pub mod bench;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod io;
pub mod knn;
pub mod lexical;
pub mod server;
pub mod svd;
pub mod synth;

pub use error::{Error, Result};

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the numeric core is generic over.
///
/// `f32` and `f64` both qualify; the on-disk formats always store `f64`.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::fmt::Display
{
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 not representable in scalar type")
    }

    fn into_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar not representable as f64")
    }
}

impl<T> Real for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::fmt::Display
{
}

/// Dynamically sized matrix over the generic scalar.
pub type Matrix<T> = nalgebra::DMatrix<T>;
/// Dynamically sized column vector over the generic scalar.
pub type Vector<T> = nalgebra::DVector<T>;

// Concrete `f64` aliases. These are the types the CLI and file formats use.
pub type KeywordDocumentMatrix64 = lexical::KeywordDocumentMatrix<f64>;
pub type DocKeywords64 = lexical::DocKeywords<f64>;
pub type SvdModel64 = svd::SvdModel<f64>;
pub type EmbeddingTable64 = embedding::EmbeddingTable<f64>;
pub type SecretKey64 = knn::SecretKey<f64>;
pub type EncryptedSubindex64 = knn::EncryptedSubindex<f64>;
pub type Trapdoor64 = knn::Trapdoor<f64>;
pub type EncryptedIndex64 = server::EncryptedIndex<f64>;
pub type RankedResults64 = server::RankedResults<f64>;
