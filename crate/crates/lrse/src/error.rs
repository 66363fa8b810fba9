use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("duplicate doc_id `{0}` in corpus")]
    DuplicateDocId(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no document produced any keyword; vocabulary is empty")]
    EmptyVocabulary,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("truncation rank {n1} out of range [1, {max}]")]
    InvalidRank { n1: usize, max: usize },

    #[error("term has zero document frequency")]
    ZeroDocumentFrequency,

    #[error("key generation failed: {0}")]
    Keygen(String),

    #[error("payload cipher failure: {0}")]
    Crypto(String),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}
