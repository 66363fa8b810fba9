//! Pretrained word-embedding table and the two vector builders on top of it:
//! TF×IDF-weighted centroids for documents, plain keyword sums for queries.
//! Out-of-table terms are skipped in both.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lexical::DocKeywords;
use crate::{Real, Vector};

#[derive(Debug, Clone)]
pub struct EmbeddingTable<T: Real> {
    dimension: usize,
    entries: HashMap<String, Vector<T>>,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn new(dimension: usize) -> Self {
        EmbeddingTable {
            dimension,
            entries: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&Vector<T>> {
        self.entries.get(word)
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vector<T>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                actual: vector.len(),
            });
        }
        let word = word.into();
        if self.entries.insert(word.clone(), vector).is_some() {
            return Err(Error::Format(format!("duplicate embedding word `{word}`")));
        }
        Ok(())
    }
}

/// Parse the textual embedding format: an optional `count dim` header line,
/// then one line per word, the word followed by its coordinates.
pub fn load_embeddings<T: Real>(path: &Path) -> Result<EmbeddingTable<T>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    parse_embeddings(reader, &path.display().to_string())
}

pub fn parse_embeddings<T: Real, R: BufRead>(reader: R, path: &str) -> Result<EmbeddingTable<T>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_string(),
        line,
        msg,
    };
    let mut table: Option<EmbeddingTable<T>> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        // Header line: exactly two numeric fields before any data row.
        if table.is_none()
            && fields.len() == 2
            && fields.iter().all(|f| f.parse::<usize>().is_ok())
        {
            continue;
        }
        if fields.len() < 2 {
            return Err(err(idx + 1, "expected a word and its coordinates".into()));
        }
        let word = fields[0];
        let coords: Vec<T> = fields[1..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map(T::of_f64)
                    .map_err(|e| err(idx + 1, format!("bad float `{f}`: {e}")))
            })
            .collect::<Result<_>>()?;
        let table = table.get_or_insert_with(|| EmbeddingTable::new(coords.len()));
        if coords.len() != table.dimension() {
            return Err(err(
                idx + 1,
                format!(
                    "row has {} coordinates, table dimension is {}",
                    coords.len(),
                    table.dimension()
                ),
            ));
        }
        table
            .insert(word, Vector::from_vec(coords))
            .map_err(|e| err(idx + 1, e.to_string()))?;
    }
    table.ok_or_else(|| Error::Format(format!("{path}: embedding file has no entries")))
}

fn normalize_or_zero<T: Real>(v: Vector<T>) -> Vector<T> {
    let norm = v.norm();
    if norm > T::zero() {
        v / norm
    } else {
        v
    }
}

/// Weighted sum of the document's keyword embeddings, normalized to a unit
/// vector. Keywords absent from the table contribute nothing; a fully
/// out-of-table document yields the zero vector.
pub fn doc_embedding<T: Real>(keywords: &DocKeywords<T>, table: &EmbeddingTable<T>) -> Vector<T> {
    let mut sum = Vector::zeros(table.dimension());
    for (term, weight) in &keywords.terms {
        if let Some(e) = table.get(term) {
            sum += e * *weight;
        }
    }
    normalize_or_zero(sum)
}

/// Unweighted sum of the query keywords' embeddings, normalized.
pub fn query_embedding<T: Real>(keywords: &[String], table: &EmbeddingTable<T>) -> Vector<T> {
    let mut sum = Vector::zeros(table.dimension());
    for k in keywords {
        if let Some(e) = table.get(k) {
            sum += e;
        }
    }
    normalize_or_zero(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Cursor;

    fn toy_table() -> EmbeddingTable<f64> {
        // Fixed 3-word, 4-dimension table used by the hand computations.
        let text = "3 4\nwing 1.0 0.0 0.0 0.0\nflow 0.0 2.0 0.0 0.0\nheat 1.0 1.0 0.0 0.0\n";
        parse_embeddings(Cursor::new(text), "toy").unwrap()
    }

    fn dk(terms: Vec<(&str, f64)>) -> DocKeywords<f64> {
        DocKeywords {
            doc_id: "d".into(),
            terms: terms.into_iter().map(|(t, w)| (t.to_string(), w)).collect(),
        }
    }

    #[test]
    fn loads_header_and_rows() {
        let t = toy_table();
        assert_eq!(t.len(), 3);
        assert_eq!(t.dimension(), 4);
        assert_eq!(t.get("flow").unwrap()[1], 2.0);
    }

    #[test]
    fn header_is_optional() {
        let t: EmbeddingTable<f64> =
            parse_embeddings(Cursor::new("wing 1 0\nflow 0 1\n"), "x").unwrap();
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn wrong_row_length_names_the_line() {
        let res: Result<EmbeddingTable<f64>> =
            parse_embeddings(Cursor::new("wing 1 0 0\nflow 0 1\n"), "x");
        assert!(matches!(res, Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn duplicate_word_is_rejected() {
        let res: Result<EmbeddingTable<f64>> =
            parse_embeddings(Cursor::new("wing 1 0\nwing 0 1\n"), "x");
        assert!(matches!(res, Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_file_is_rejected() {
        let res: Result<EmbeddingTable<f64>> = parse_embeddings(Cursor::new(""), "x");
        assert!(matches!(res, Err(Error::Format(_))));
    }

    #[test]
    fn single_keyword_doc_is_normalized_embedding() {
        let t = toy_table();
        let e = doc_embedding(&dk(vec![("flow", 1.0)]), &t);
        assert_relative_eq!(e[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_cancellation_yields_zero() {
        let mut t = EmbeddingTable::<f64>::new(2);
        t.insert("pos", Vector::from_vec(vec![1.0, 2.0])).unwrap();
        t.insert("neg", Vector::from_vec(vec![-1.0, -2.0])).unwrap();
        let e = doc_embedding(&dk(vec![("pos", 0.5), ("neg", 0.5)]), &t);
        assert_eq!(e.norm(), 0.0);
    }

    #[test]
    fn weighted_sum_matches_hand_computation() {
        // 0.6*wing + 0.8*flow + 0.0*heat = (0.6, 1.6, 0, 0), norm sqrt(2.92).
        let t = toy_table();
        let e = doc_embedding(&dk(vec![("wing", 0.6), ("flow", 0.8), ("heat", 0.0)]), &t);
        let norm = (0.6f64 * 0.6 + 1.6 * 1.6).sqrt();
        assert_relative_eq!(e[0], 0.6 / norm, epsilon = 1e-12);
        assert_relative_eq!(e[1], 1.6 / norm, epsilon = 1e-12);
    }

    #[test]
    fn doc_embedding_ignores_keyword_order() {
        let t = toy_table();
        let a = doc_embedding(&dk(vec![("wing", 0.6), ("heat", 0.4)]), &t);
        let b = doc_embedding(&dk(vec![("heat", 0.4), ("wing", 0.6)]), &t);
        assert!((a - b).amax() <= 1e-15);
    }

    #[test]
    fn query_single_in_table_keyword() {
        let t = toy_table();
        let q = query_embedding(&["flow".to_string()], &t);
        assert_relative_eq!(q[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn query_out_of_table_keyword_is_skipped() {
        let t = toy_table();
        let q = query_embedding(&["plasma".to_string()], &t);
        assert_eq!(q.norm(), 0.0);
    }

    #[test]
    fn query_sum_matches_hand_computation() {
        // wing + heat = (2, 1, 0, 0), norm sqrt(5).
        let t = toy_table();
        let q = query_embedding(&["wing".to_string(), "heat".to_string()], &t);
        assert_relative_eq!(q[0], 2.0 / 5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(q[1], 1.0 / 5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn query_equals_doc_for_unit_weight_single_keyword() {
        let t = toy_table();
        let d = doc_embedding(&dk(vec![("heat", 1.0)]), &t);
        let q = query_embedding(&["heat".to_string()], &t);
        assert!((d - q).amax() <= 1e-15);
    }
}
