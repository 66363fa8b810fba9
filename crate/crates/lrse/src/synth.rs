//! Deterministic synthetic data: the planted-relevance corpus used by the
//! quality checks, and random corpora/vectors for the timing harness.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::corpus::{Corpus, Document, QuerySet};
use crate::embedding::EmbeddingTable;
use crate::eval::QrelSet;
use crate::{Real, Vector};

/// Number of topics in the planted corpus; each contributes ten documents
/// and one query.
pub const PLANTED_TOPICS: usize = 20;
const FILLER_WORDS: usize = 12;

/// The planted corpus, its queries, judgments, and a toy embedding table.
#[derive(Debug, Clone)]
pub struct PlantedData<T: Real> {
    pub corpus: Corpus,
    pub queries: QuerySet,
    pub qrels: QrelSet,
    pub table: EmbeddingTable<T>,
}

/// Build a fixed 200-document corpus with planted graded relevance.
///
/// Each topic `j` owns two content words (`alphaNN`, `betaNN`), a query
/// synonym `gammaNN` that never occurs in any document, and ten documents:
/// three "core" docs (grade 4, heavy on the topic words), three
/// "peripheral" docs (grade 2, one topic mention diluted by filler words)
/// and four unjudged filler-only docs. The query for topic `j` is
/// `gammaNN alphaNN`.
///
/// The embedding table sends all three topic words to the same axis and
/// every filler word to one shared axis, so embedding similarity separates
/// core from peripheral documents even though the synonym is lexically
/// absent. Peripheral doc ids sort before core doc ids on purpose: a
/// matching-keyword-count scorer ties them at one match and its ascending
/// id tie-break then ranks the lower grade first.
pub fn planted_corpus<T: Real>() -> PlantedData<T> {
    let alpha = |j: usize| format!("alpha{j:02}");
    let beta = |j: usize| format!("beta{j:02}");
    let gamma = |j: usize| format!("gamma{j:02}");
    let filler = |m: usize| format!("filler{:02}", m % FILLER_WORDS);

    let mut documents = Vec::new();
    let mut queries = Vec::new();
    let mut qrels = QrelSet::new();
    for j in 0..PLANTED_TOPICS {
        for i in 0..3 {
            // Peripheral: one topic mention among eight distinct fillers.
            // The three peripherals of a topic share one filler subset:
            // per-document filler variation would create tiny topic-local
            // concepts that the S⁻¹ rescaling in the projection inflates.
            let mut words = vec![alpha(j)];
            words.extend((0..8).map(|m| filler(j + m)));
            documents.push(Document::new(format!("d{j:02}a{i}"), words.join(" ")));
            qrels.insert(&format!("q{j:02}"), &format!("d{j:02}a{i}"), 2);
        }
        for i in 0..3 {
            // Core: dominated by the topic words, lightly diluted by the
            // same filler pool the peripherals use so core and peripheral
            // docs share a concept subspace.
            let mut words = vec![alpha(j); 8];
            words.extend(vec![beta(j); 2]);
            words.extend((0..2).map(|m| filler(j + m)));
            documents.push(Document::new(format!("d{j:02}b{i}"), words.join(" ")));
            qrels.insert(&format!("q{j:02}"), &format!("d{j:02}b{i}"), 4);
        }
        for i in 0..4 {
            // Filler-only, unjudged.
            let words: Vec<String> = (0..5).map(|m| filler(5 * j + 7 * i + m)).collect();
            documents.push(Document::new(format!("d{j:02}c{i}"), words.join(" ")));
        }
        queries.push((format!("q{j:02}"), format!("{} {}", gamma(j), alpha(j))));
    }

    let mut table = EmbeddingTable::new(PLANTED_TOPICS + 1);
    let axis = |a: usize| {
        let mut v = Vector::zeros(PLANTED_TOPICS + 1);
        v[a] = T::one();
        v
    };
    for j in 0..PLANTED_TOPICS {
        table.insert(alpha(j), axis(j)).expect("fresh word");
        table.insert(beta(j), axis(j)).expect("fresh word");
        table.insert(gamma(j), axis(j)).expect("fresh word");
    }
    for m in 0..FILLER_WORDS {
        table.insert(filler(m), axis(PLANTED_TOPICS)).expect("fresh word");
    }

    PlantedData {
        corpus: Corpus::new(documents).expect("planted ids are distinct"),
        queries: QuerySet::new(queries),
        qrels,
        table,
    }
}

/// Random corpus for timing sweeps: `doc_count` documents of `words_per_doc`
/// draws from a `vocab_size`-word pool. Deterministic in the seed.
pub fn random_corpus(doc_count: usize, vocab_size: usize, words_per_doc: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let pool: Vec<String> = (0..vocab_size).map(|i| format!("term{i:04}")).collect();
    let width = doc_count.to_string().len();
    let documents = (0..doc_count)
        .map(|i| {
            let words: Vec<&str> = (0..words_per_doc)
                .map(|_| pool.choose(&mut rng).expect("non-empty pool").as_str())
                .collect();
            Document::new(format!("doc{i:0width$}"), words.join(" "))
        })
        .collect();
    Corpus::new(documents).expect("generated ids are distinct")
}

/// Random embedding table covering the `random_corpus` word pool.
pub fn random_embeddings<T: Real>(vocab_size: usize, dimension: usize, seed: u64) -> EmbeddingTable<T> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dimension);
    for i in 0..vocab_size {
        let v = Vector::from_fn(dimension, |_, _| T::of_f64(rng.random_range(-1.0..1.0)));
        table.insert(format!("term{i:04}"), v).expect("fresh word");
    }
    table
}

/// Random vector on the unit sphere (zero-safe: resamples the degenerate
/// all-zero draw, which has probability zero).
pub fn random_unit<T: Real>(dim: usize, rng: &mut impl Rng) -> Vector<T> {
    loop {
        let v: Vector<T> = Vector::from_fn(dim, |_, _| T::of_f64(rng.random_range(-1.0..1.0)));
        let norm = v.norm();
        if norm > T::of_f64(1e-9) {
            return v / norm;
        }
    }
}
