//! Search-quality evaluation: NDCG@k over graded relevance judgments, the
//! keyword-count and TF×IDF cosine baselines, and the harness that runs the
//! full encrypted pipeline next to them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::{Corpus, QuerySet};
use crate::embedding::{doc_embedding, query_embedding, EmbeddingTable};
use crate::error::{Error, Result};
use crate::knn::{encrypt_index, gen_trapdoor, keygen, TrapdoorParams};
use crate::lexical::{build_model, query_term_vector, LexicalModel};
use crate::server::{top_k_sequential, EncryptedIndex};
use crate::svd::truncated_svd;
use crate::{Real, Vector};

pub const MAX_GRADE: u8 = 4;

/// Graded relevance judgments: query id -> doc id -> grade in 0..=4.
/// Unlisted pairs are grade 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QrelSet {
    grades: HashMap<String, HashMap<String, u8>>,
}

impl QrelSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u8) {
        self.grades
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade.min(MAX_GRADE));
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u8 {
        self.grades
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn judged(&self, query_id: &str) -> Option<&HashMap<String, u8>> {
        self.grades.get(query_id)
    }

    pub fn has_query(&self, query_id: &str) -> bool {
        self.grades.contains_key(query_id)
    }

    pub fn query_count(&self) -> usize {
        self.grades.len()
    }
}

/// Parse whitespace-separated `query_id doc_id grade` lines. Grades outside
/// 0..=4 are clamped (Cranfield files carry a -1 convention); each clamp
/// emits a warning line through `warn`.
pub fn load_qrels(path: &Path, mut warn: impl FnMut(&str)) -> Result<QrelSet> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut qrels = QrelSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: "expected `query_id doc_id grade`".into(),
            });
        }
        let grade: i64 = fields[2].parse().map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: format!("bad grade `{}`: {e}", fields[2]),
        })?;
        let clamped = grade.clamp(0, MAX_GRADE as i64) as u8;
        if grade != clamped as i64 {
            warn(&format!(
                "{}:{}: grade {grade} clamped to {clamped}",
                path.display(),
                idx + 1
            ));
        }
        qrels.insert(fields[0], fields[1], clamped);
    }
    Ok(qrels)
}

/// NDCG@k with linear gain: `DCG_k = sum rel_i / log2(i+1)`, normalized by
/// the DCG of the ideal (grade-descending) ordering truncated at `k`.
/// Returns 0 when the query has no relevant documents.
pub fn ndcg_at_k(ranked_doc_ids: &[String], qrels: &HashMap<String, u8>, k: usize) -> f64 {
    let discount = |pos: usize| ((pos + 2) as f64).log2();
    let dcg: f64 = ranked_doc_ids
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| qrels.get(id).copied().unwrap_or(0) as f64 / discount(i))
        .sum();
    let mut ideal: Vec<u8> = qrels.values().copied().collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / discount(i))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Keyword-count relevance: size of the intersection of the two keyword sets.
pub fn baseline_mrse_score(doc_keywords: &HashSet<String>, query_keywords: &HashSet<String>) -> usize {
    doc_keywords.intersection(query_keywords).count()
}

/// Cosine similarity of TF×IDF vectors over the shared vocabulary; 0 when
/// either vector is zero.
pub fn baseline_tfidf_score<T: Real>(doc_column: &Vector<T>, query_vector: &Vector<T>) -> T {
    let dn = doc_column.norm();
    let qn = query_vector.norm();
    if dn == T::zero() || qn == T::zero() {
        return T::zero();
    }
    doc_column.dot(query_vector) / (dn * qn)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Full encrypted pipeline: SVD concept + embedding halves under the
    /// secure kNN transform.
    Lrse,
    /// Plaintext twin of `Lrse` (same two cosines, no encryption); used to
    /// check ranking equivalence.
    LrsePlaintext,
    /// TF×IDF cosine over the vocabulary.
    TfIdf,
    /// Matching-keyword count.
    MrseI,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Lrse => "lrse",
            Scheme::LrsePlaintext => "lrse-plaintext",
            Scheme::TfIdf => "tfidf",
            Scheme::MrseI => "mrse1",
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvalParams {
    pub n1: usize,
    pub seed: u64,
    pub trapdoor: TrapdoorParams,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            n1: crate::svd::DEFAULT_CONCEPTS,
            seed: 0,
            trapdoor: TrapdoorParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub scheme: &'static str,
    pub query_id: String,
    pub ndcg: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub warnings: Vec<String>,
    pub k_values: Vec<usize>,
}

impl EvalReport {
    /// Mean per-query NDCG@k for one scheme.
    pub fn macro_average(&self, scheme: Scheme, k: usize) -> f64 {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.scheme == scheme.name())
            .filter_map(|r| r.ndcg.get(&k).copied())
            .collect();
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    }

    /// Per-query CSV: `scheme,query_id,ndcg@k...` columns.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "scheme,query_id")?;
        for k in &self.k_values {
            write!(w, ",ndcg{k}")?;
        }
        writeln!(w)?;
        for row in &self.rows {
            write!(w, "{},{}", row.scheme, row.query_id)?;
            for k in &self.k_values {
                write!(w, ",{:.6}", row.ndcg.get(k).copied().unwrap_or(0.0))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Macro-average summary, one line per scheme.
    pub fn write_summary<W: Write>(&self, w: &mut W, schemes: &[Scheme]) -> Result<()> {
        write!(w, "scheme")?;
        for k in &self.k_values {
            write!(w, ",ndcg{k}")?;
        }
        writeln!(w)?;
        for &scheme in schemes {
            write!(w, "{}", scheme.name())?;
            for &k in &self.k_values {
                write!(w, ",{:.3}", self.macro_average(scheme, k))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Run every scheme over every judged query and collect per-query NDCG@k.
///
/// The encrypted scheme runs the full pipeline (key generation from the
/// seed, per-document subindex encryption, per-query trapdoors, server-side
/// top-k); baselines rank with their plaintext scorers. Queries without
/// judgments are skipped with a warning.
pub fn run_eval<T: Real + Send + Sync>(
    corpus: &Corpus,
    queries: &QuerySet,
    qrels: &QrelSet,
    table: &EmbeddingTable<T>,
    schemes: &[Scheme],
    k_values: &[usize],
    params: &EvalParams,
) -> Result<EvalReport> {
    let max_k = k_values.iter().copied().max().unwrap_or(10);
    let model: LexicalModel<T> = build_model(corpus)?;
    let n1_req = params.n1.min(model.matrix.term_count().min(corpus.len()));
    let svd = truncated_svd(&model.matrix.weights, n1_req.max(1))?;
    let n2 = table.dimension();

    // Plain per-document representations, shared by all schemes.
    let d1: Vec<Vector<T>> = (0..corpus.len())
        .map(|i| svd.project(&model.matrix.weights.column(i).into_owned()))
        .collect::<Result<_>>()?;
    let d2: Vec<Vector<T>> = model
        .doc_keywords
        .iter()
        .map(|dk| doc_embedding(dk, table))
        .collect();

    let needs_encrypted = schemes.contains(&Scheme::Lrse);
    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let (key, index) = if needs_encrypted {
        let n = svd.concepts() + n2;
        let key = keygen::<T>(n, &mut rng)?;
        let subs = corpus
            .documents
            .iter()
            .enumerate()
            .map(|(i, doc)| encrypt_index(&doc.doc_id, &d1[i], &d2[i], &key, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        (Some(key), Some(EncryptedIndex::new(subs)?))
    } else {
        (None, None)
    };

    let keyword_sets: Vec<HashSet<String>> = model
        .doc_keywords
        .iter()
        .map(|dk| dk.term_set().map(str::to_string).collect())
        .collect();

    let mut report = EvalReport {
        k_values: k_values.to_vec(),
        ..Default::default()
    };

    for query in &queries.queries {
        let Some(judged) = qrels.judged(&query.query_id) else {
            report
                .warnings
                .push(format!("query {} has no judgments, skipped", query.query_id));
            continue;
        };
        let q_vocab = query_term_vector::<T>(&query.keywords, &model.matrix.vocabulary);
        let q1 = svd.project(&q_vocab)?;
        let q2 = query_embedding(&query.keywords, table);
        let query_terms: HashSet<String> = query.keywords.iter().cloned().collect();

        for &scheme in schemes {
            let ranking: Vec<String> = match scheme {
                Scheme::Lrse => {
                    let key = key.as_ref().expect("key generated for lrse");
                    let index = index.as_ref().expect("index built for lrse");
                    let td = gen_trapdoor(&q1, &q2, key, params.trapdoor, &mut rng)?;
                    top_k_sequential(index, &td, max_k)?
                        .entries
                        .into_iter()
                        .map(|(id, _)| id)
                        .collect()
                }
                Scheme::LrsePlaintext => rank_plain(corpus, |i| {
                    let s1 = d1[i].dot(&q1);
                    let s2 = d2[i].dot(&q2);
                    (s1 + s2).into_f64()
                })
                .into_iter()
                .take(max_k)
                .collect(),
                Scheme::TfIdf => rank_plain(corpus, |i| {
                    baseline_tfidf_score(&model.matrix.weights.column(i).into_owned(), &q_vocab)
                        .into_f64()
                })
                .into_iter()
                .take(max_k)
                .collect(),
                Scheme::MrseI => rank_plain(corpus, |i| {
                    baseline_mrse_score(&keyword_sets[i], &query_terms) as f64
                })
                .into_iter()
                .take(max_k)
                .collect(),
            };
            let ndcg = k_values
                .iter()
                .map(|&k| (k, ndcg_at_k(&ranking, judged, k)))
                .collect();
            report.rows.push(EvalRow {
                scheme: scheme.name(),
                query_id: query.query_id.clone(),
                ndcg,
            });
        }
    }
    Ok(report)
}

/// Rank all documents by a plaintext score, ties broken by ascending doc id.
fn rank_plain(corpus: &Corpus, score_of: impl Fn(usize) -> f64) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = (0..corpus.len())
        .map(|i| (score_of(i), corpus.documents[i].doc_id.as_str()))
        .collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("scores are finite")
            .then_with(|| a.1.cmp(b.1))
    });
    scored.into_iter().map(|(_, id)| id.to_string()).collect()
}
