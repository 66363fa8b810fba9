//! TF×IDF weighting, top-10 keyword extraction, and the keyword-document
//! matrix `A` whose unit-norm columns feed the truncated SVD.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufReader, BufWriter, Read, Write};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::io;
use crate::{Matrix, Real, Vector};

/// Keywords kept per document.
pub const TOP_KEYWORDS: usize = 10;

/// Sorted, duplicate-free list of corpus keywords with index lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(mut terms: Vec<String>) -> Self {
        terms.sort_unstable();
        terms.dedup();
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { terms, index }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }
}

/// Document frequencies over a fixed corpus.
#[derive(Debug, Clone)]
pub struct CorpusStats {
    pub doc_count: usize,
    doc_freq: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut doc_freq: HashMap<String, usize> = HashMap::new();
        for doc in &corpus.documents {
            let mut seen: Vec<&String> = doc.tokens.iter().collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *doc_freq.entry(t.clone()).or_insert(0) += 1;
            }
        }
        CorpusStats {
            doc_count: corpus.len(),
            doc_freq,
        }
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freq.get(term).copied().unwrap_or(0)
    }
}

/// Inverse document frequency: `ln(|D| / |D_t| + 0.01)`.
pub fn idf<T: Real>(document_count: usize, document_frequency: usize) -> Result<T> {
    if document_frequency == 0 {
        return Err(Error::ZeroDocumentFrequency);
    }
    let ratio = document_count as f64 / document_frequency as f64 + 0.01;
    Ok(T::of_f64(ratio.ln()))
}

/// Top keywords of one document with their full-vector TF×IDF weights.
///
/// Weights are sorted descending; ties broken by lexicographic term order.
/// The weights are taken from the document's normalized term vector before
/// truncation, so they sum-of-squares to 1 only over the full vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DocKeywords<T: Real> {
    pub doc_id: String,
    pub terms: Vec<(String, T)>,
}

impl<T: Real> DocKeywords<T> {
    pub fn term_set(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(t, _)| t.as_str())
    }
}

/// Normalized TF×IDF weights of a document over its own terms.
pub fn doc_term_weights<T: Real>(doc: &Document, stats: &CorpusStats) -> BTreeMap<String, T> {
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    for t in &doc.tokens {
        *tf.entry(t).or_insert(0) += 1;
    }
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    let mut norm_sq = 0.0;
    for (term, count) in &tf {
        let idf: f64 = idf(stats.doc_count, stats.doc_freq(term))
            .expect("term taken from the corpus has nonzero document frequency");
        let w = *count as f64 * idf;
        norm_sq += w * w;
        weights.insert((*term).to_string(), w);
    }
    let norm = norm_sq.sqrt();
    weights
        .into_iter()
        .map(|(t, w)| (t, T::of_f64(if norm > 0.0 { w / norm } else { 0.0 })))
        .collect()
}

/// Highest-weight terms of a document, at most `limit` of them.
pub fn extract_top_keywords<T: Real>(
    doc_id: &str,
    weights: &BTreeMap<String, T>,
    limit: usize,
) -> DocKeywords<T> {
    // BTreeMap iteration is lexicographic, so a stable sort by descending
    // weight leaves ties in lexicographic order.
    let mut terms: Vec<(String, T)> = weights
        .iter()
        .filter(|(_, w)| **w > T::zero())
        .map(|(t, w)| (t.clone(), *w))
        .collect();
    terms.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("weights are finite"));
    terms.truncate(limit);
    DocKeywords {
        doc_id: doc_id.to_string(),
        terms,
    }
}

/// TF×IDF document vector restricted to `vocab` and re-normalized to unit
/// norm (all-zero when the document shares no vocabulary terms).
pub fn tfidf_document_vector<T: Real>(
    doc: &Document,
    stats: &CorpusStats,
    vocab: &Vocabulary,
) -> Vector<T> {
    let weights = doc_term_weights::<T>(doc, stats);
    let mut v = Vector::zeros(vocab.len());
    for (term, w) in weights {
        if let Some(i) = vocab.index_of(&term) {
            v[i] = w;
        }
    }
    normalize_or_zero(&mut v);
    v
}

/// Binary occurrence vector of query keywords over the vocabulary.
pub fn query_term_vector<T: Real>(keywords: &[String], vocab: &Vocabulary) -> Vector<T> {
    let mut v = Vector::zeros(vocab.len());
    for k in keywords {
        if let Some(i) = vocab.index_of(k) {
            v[i] = T::one();
        }
    }
    v
}

fn normalize_or_zero<T: Real>(v: &mut Vector<T>) {
    let norm = v.norm();
    if norm > T::zero() {
        *v /= norm;
    }
}

/// TF×IDF-weighted term-by-document matrix with unit-norm (or zero) columns.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordDocumentMatrix<T: Real> {
    pub vocabulary: Vocabulary,
    pub doc_ids: Vec<String>,
    /// `t × |D|`, column `i` is document `i`.
    pub weights: Matrix<T>,
}

impl<T: Real> KeywordDocumentMatrix<T> {
    pub fn term_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn doc_count(&self) -> usize {
        self.weights.ncols()
    }

    /// Binary weight file: `t`, `|D|`, then column-major 64-bit floats.
    pub fn save_weights<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut w = BufWriter::new(w);
        io::write_magic(&mut w, io::MATRIX_MAGIC)?;
        io::write_u32(&mut w, self.term_count() as u32)?;
        io::write_u32(&mut w, self.doc_count() as u32)?;
        io::write_matrix(&mut w, &self.weights)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_weights<R: Read>(r: &mut R) -> Result<Matrix<T>> {
        let mut r = BufReader::new(r);
        io::expect_magic(&mut r, io::MATRIX_MAGIC)?;
        let t = io::read_u32(&mut r)? as usize;
        let d = io::read_u32(&mut r)? as usize;
        io::read_matrix(&mut r, t, d)
    }

    /// CSV debug dump: one row per term, documents as columns.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "term")?;
        for id in &self.doc_ids {
            write!(w, ",{id}")?;
        }
        writeln!(w)?;
        for (row, term) in self.vocabulary.terms().iter().enumerate() {
            write!(w, "{term}")?;
            for col in 0..self.doc_count() {
                write!(w, ",{}", self.weights[(row, col)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// The matrix together with the per-document keyword lists it was built from.
#[derive(Debug, Clone)]
pub struct LexicalModel<T: Real> {
    pub matrix: KeywordDocumentMatrix<T>,
    pub doc_keywords: Vec<DocKeywords<T>>,
}

/// Build the lexical model: per-document TF×IDF weights, top-10 keyword
/// extraction, vocabulary as the union of keyword sets, and matrix columns
/// restricted to the vocabulary and re-normalized.
pub fn build_model<T: Real>(corpus: &Corpus) -> Result<LexicalModel<T>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let stats = CorpusStats::from_corpus(corpus);
    let doc_keywords: Vec<DocKeywords<T>> = corpus
        .documents
        .iter()
        .map(|d| {
            let weights = doc_term_weights::<T>(d, &stats);
            extract_top_keywords(&d.doc_id, &weights, TOP_KEYWORDS)
        })
        .collect();

    let vocabulary = Vocabulary::new(
        doc_keywords
            .iter()
            .flat_map(|dk| dk.terms.iter().map(|(t, _)| t.clone()))
            .collect(),
    );
    if vocabulary.is_empty() {
        return Err(Error::EmptyVocabulary);
    }

    let mut weights = Matrix::zeros(vocabulary.len(), corpus.len());
    for (i, doc) in corpus.documents.iter().enumerate() {
        weights.set_column(i, &tfidf_document_vector(doc, &stats, &vocabulary));
    }
    Ok(LexicalModel {
        matrix: KeywordDocumentMatrix {
            vocabulary,
            doc_ids: corpus.documents.iter().map(|d| d.doc_id.clone()).collect(),
            weights,
        },
        doc_keywords,
    })
}

pub fn build_matrix<T: Real>(corpus: &Corpus) -> Result<KeywordDocumentMatrix<T>> {
    build_model(corpus).map(|m| m.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use approx::assert_relative_eq;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text)
    }

    #[test]
    fn idf_direct_values() {
        assert_relative_eq!(idf::<f64>(10, 10).unwrap(), 1.01f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(idf::<f64>(10, 10).unwrap(), 0.00995, epsilon = 1e-5);
        assert_relative_eq!(idf::<f64>(1000, 10).unwrap(), 100.01f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(idf::<f64>(1000, 10).unwrap(), 4.60527, epsilon = 1e-5);
        assert_relative_eq!(idf::<f64>(1, 1).unwrap(), 1.01f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn idf_zero_document_frequency() {
        assert!(matches!(
            idf::<f64>(10, 0),
            Err(Error::ZeroDocumentFrequency)
        ));
    }

    #[test]
    fn single_vocabulary_term_gets_unit_weight() {
        let corpus = Corpus::new(vec![doc("d1", "wing"), doc("d2", "heat")]).unwrap();
        let stats = CorpusStats::from_corpus(&corpus);
        let vocab = Vocabulary::new(vec!["heat".into(), "wing".into()]);
        let v = tfidf_document_vector::<f64>(&corpus.documents[0], &stats, &vocab);
        assert_relative_eq!(v[vocab.index_of("wing").unwrap()], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[vocab.index_of("heat").unwrap()], 0.0);
    }

    #[test]
    fn equal_tf_equal_idf_split_evenly() {
        // Both terms appear once in every document, so tf and idf agree and
        // the unit-norm column must be (1/sqrt(2), 1/sqrt(2)).
        let corpus = Corpus::new(vec![doc("d1", "wing heat"), doc("d2", "heat wing")]).unwrap();
        let stats = CorpusStats::from_corpus(&corpus);
        let vocab = Vocabulary::new(vec!["heat".into(), "wing".into()]);
        let v = tfidf_document_vector::<f64>(&corpus.documents[0], &stats, &vocab);
        assert_relative_eq!(v[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(v[1], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn out_of_vocabulary_document_is_zero() {
        let corpus = Corpus::new(vec![doc("d1", "wing"), doc("d2", "heat")]).unwrap();
        let stats = CorpusStats::from_corpus(&corpus);
        let vocab = Vocabulary::new(vec!["shock".into()]);
        let v = tfidf_document_vector::<f64>(&corpus.documents[0], &stats, &vocab);
        assert_eq!(v.norm(), 0.0);
    }

    #[test]
    fn top_keywords_fewer_than_limit() {
        let mut w = BTreeMap::new();
        w.insert("alpha".to_string(), 0.6);
        w.insert("beta".to_string(), 0.8);
        w.insert("gamma".to_string(), 0.0);
        let dk = extract_top_keywords("d", &w, TOP_KEYWORDS);
        assert_eq!(dk.terms.len(), 2);
        assert_eq!(dk.terms[0].0, "beta");
    }

    #[test]
    fn top_keywords_tie_broken_lexicographically() {
        // 12 terms, the two tied at the cut are `tieb`/`tiea`; the smaller
        // term must survive.
        let mut w = BTreeMap::new();
        for i in 0..9 {
            w.insert(format!("big{i}"), 1.0 - 0.01 * i as f64);
        }
        w.insert("tieb".to_string(), 0.5);
        w.insert("tiea".to_string(), 0.5);
        w.insert("tiny".to_string(), 0.1);
        let dk = extract_top_keywords("d", &w, TOP_KEYWORDS);
        assert_eq!(dk.terms.len(), TOP_KEYWORDS);
        let names: Vec<_> = dk.terms.iter().map(|(t, _)| t.as_str()).collect();
        assert!(names.contains(&"tiea"));
        assert!(!names.contains(&"tieb"));
    }

    #[test]
    fn top_keywords_of_zero_vector_is_empty() {
        let w: BTreeMap<String, f64> = BTreeMap::new();
        assert!(extract_top_keywords("d", &w, TOP_KEYWORDS).terms.is_empty());
    }

    #[test]
    fn disjoint_single_keywords_give_identity() {
        // Terms chosen so sorted vocabulary order matches document order.
        let corpus = Corpus::new(vec![doc("d1", "heat"), doc("d2", "wing")]).unwrap();
        let m = build_matrix::<f64>(&corpus).unwrap();
        assert_eq!(m.term_count(), 2);
        assert_relative_eq!(
            (&m.weights - Matrix::<f64>::identity(2, 2)).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn single_document_matrix() {
        let corpus = Corpus::new(vec![doc("d1", "wing heat wing")]).unwrap();
        let m = build_matrix::<f64>(&corpus).unwrap();
        assert_eq!(m.doc_count(), 1);
        assert_relative_eq!(m.weights.column(0).norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn toy_corpus_matches_hand_computation() {
        // Three documents over {wing, flow, heat}; every term appears in two
        // documents so all idf values agree and cancel under normalization,
        // leaving columns proportional to raw term frequencies:
        //   d1: wing x2, flow x1  -> (2, 1)/sqrt(5)
        //   d2: flow x1, heat x1  -> (1, 1)/sqrt(2)
        //   d3: heat x3, wing x1  -> (3, 1)/sqrt(10)
        let corpus = Corpus::new(vec![
            doc("d1", "wing wing flow"),
            doc("d2", "flow heat"),
            doc("d3", "heat heat heat wing"),
        ])
        .unwrap();
        let m = build_matrix::<f64>(&corpus).unwrap();
        assert_eq!(m.vocabulary.terms(), ["flow", "heat", "wing"]);
        let at = |term: &str, col: usize| m.weights[(m.vocabulary.index_of(term).unwrap(), col)];
        assert_relative_eq!(at("wing", 0), 2.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(at("flow", 0), 1.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(at("heat", 0), 0.0);
        assert_relative_eq!(at("flow", 1), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(at("heat", 1), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(at("heat", 2), 3.0 / 10f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(at("wing", 2), 1.0 / 10f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn columns_unit_norm_and_vocab_bounded() {
        let corpus = Corpus::new(
            (0..25)
                .map(|i| doc(&format!("d{i}"), &format!("term{i} term{} shared", (i + 1) % 25)))
                .collect(),
        )
        .unwrap();
        let m = build_matrix::<f64>(&corpus).unwrap();
        assert!(m.term_count() <= TOP_KEYWORDS * corpus.len());
        for c in 0..m.doc_count() {
            let n = m.weights.column(c).norm();
            assert!((n - 1.0).abs() <= 1e-9 || n == 0.0, "column {c} norm {n}");
        }
    }

    #[test]
    fn build_matrix_is_deterministic() {
        let corpus = Corpus::new(vec![
            doc("d1", "shock wave boundary layer"),
            doc("d2", "laminar boundary layer heat"),
        ])
        .unwrap();
        let a = build_matrix::<f64>(&corpus).unwrap();
        let b = build_matrix::<f64>(&corpus).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.vocabulary, b.vocabulary);
    }

    #[test]
    fn weights_round_trip_through_binary_file() {
        let corpus = Corpus::new(vec![doc("d1", "wing wing flow"), doc("d2", "flow heat")]).unwrap();
        let m = build_matrix::<f64>(&corpus).unwrap();
        let mut buf = Vec::new();
        m.save_weights(&mut buf).unwrap();
        let loaded = KeywordDocumentMatrix::<f64>::load_weights(&mut buf.as_slice()).unwrap();
        assert_eq!(loaded, m.weights);
    }

    #[test]
    fn keywordless_document_keeps_its_column() {
        let corpus = Corpus::new(vec![doc("d1", "wing"), doc("d2", "a the of")]).unwrap();
        let m = build_matrix::<f64>(&corpus).unwrap();
        assert_eq!(m.doc_count(), 2);
        assert_eq!(m.weights.column(1).norm(), 0.0);
    }

    #[test]
    fn all_stopword_corpus_has_no_vocabulary() {
        let corpus = Corpus::new(vec![doc("d1", "a the of")]).unwrap();
        assert!(matches!(
            build_matrix::<f64>(&corpus),
            Err(Error::EmptyVocabulary)
        ));
    }
}
