//! System-cost measurements: wall-clock sweeps over document count, query
//! keyword count, and vector dimension, plus the least-squares fit used to
//! check the linear-growth claims.

use std::io::Write;
use std::time::Instant;

use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::Corpus;
use crate::embedding::{doc_embedding, query_embedding, EmbeddingTable};
use crate::error::Result;
use crate::knn::{encrypt_index, gen_trapdoor, keygen, SecretKey, Trapdoor, TrapdoorParams};
use crate::lexical::{build_model, query_term_vector, LexicalModel, Vocabulary};
use crate::server::{top_k_sequential, EncryptedIndex};
use crate::svd::{truncated_svd, SvdModel};
use crate::synth::{random_corpus, random_embeddings, random_unit};
use crate::{Real, Vector};

pub const DEFAULT_REPS: usize = 5;

/// Median wall-clock seconds per call of `f`, over `reps` samples of
/// `iters` calls each. Batching the calls keeps sub-millisecond operations
/// above timer noise.
pub fn median_seconds(reps: usize, iters: usize, mut f: impl FnMut()) -> f64 {
    assert!(reps >= 1 && iters >= 1);
    let mut samples: Vec<f64> = (0..reps)
        .map(|_| {
            let start = Instant::now();
            for _ in 0..iters {
                f();
            }
            start.elapsed().as_secs_f64() / iters as f64
        })
        .collect();
    samples.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    samples[samples.len() / 2]
}

/// Least-squares line through (x, y) points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub operation: String,
    /// The swept parameter: document count, keyword count, or n+1.
    pub parameter: f64,
    pub seconds: f64,
    /// Artifact size where one applies (0 otherwise).
    pub bytes: u64,
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "operation,parameter,seconds,bytes")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{:.9},{}",
                row.operation, row.parameter, row.seconds, row.bytes
            )?;
        }
        Ok(())
    }

    /// (parameter, seconds) series for one operation, in recorded order.
    pub fn series(&self, operation: &str) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .filter(|r| r.operation == operation)
            .map(|r| (r.parameter, r.seconds))
            .unzip()
    }
}

/// Fixed shape parameters for the synthetic sweeps.
#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub n1: usize,
    pub n2: usize,
    pub vocab_size: usize,
    pub words_per_doc: usize,
    pub seed: u64,
    pub reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n1: 50,
            n2: 50,
            vocab_size: 500,
            words_per_doc: 25,
            seed: 42,
            reps: DEFAULT_REPS,
        }
    }
}

/// End-to-end index construction (lexical model, truncated SVD, embeddings,
/// per-document encryption) timed over a sweep of document counts.
pub fn bench_index_build<T: Real>(doc_counts: &[usize], cfg: &BenchConfig) -> Result<BenchReport> {
    let table: EmbeddingTable<T> = random_embeddings(cfg.vocab_size, cfg.n2, cfg.seed);
    let mut report = BenchReport::default();
    for &docs in doc_counts {
        let corpus = random_corpus(docs, cfg.vocab_size, cfg.words_per_doc, cfg.seed ^ docs as u64);
        let mut bytes = 0u64;
        let seconds = median_seconds(cfg.reps, 1, || {
            let index = build_encrypted_index(&corpus, &table, cfg).expect("bench build");
            let mut buf = Vec::new();
            index.save(&mut buf).expect("in-memory save");
            bytes = buf.len() as u64;
        });
        report.rows.push(BenchRow {
            operation: "build-index".into(),
            parameter: docs as f64,
            seconds,
            bytes,
        });
    }
    Ok(report)
}

fn build_encrypted_index<T: Real>(
    corpus: &Corpus,
    table: &EmbeddingTable<T>,
    cfg: &BenchConfig,
) -> Result<EncryptedIndex<T>> {
    let model: LexicalModel<T> = build_model(corpus)?;
    let n1 = cfg.n1.min(model.matrix.term_count()).min(corpus.len());
    let svd = truncated_svd(&model.matrix.weights, n1)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let key = keygen::<T>(svd.concepts() + cfg.n2, &mut rng)?;
    let subs = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(i, doc)| {
            let d1 = svd.project(&model.matrix.weights.column(i).into_owned())?;
            let d2 = doc_embedding(&model.doc_keywords[i], table);
            encrypt_index(&doc.doc_id, &d1, &d2, &key, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    EncryptedIndex::new(subs)
}

/// Trapdoor generation (term vector, concept projection, embedding sum,
/// secure kNN transform) timed over a sweep of query keyword counts, with
/// the model and key built once outside the timed region.
pub fn bench_trapdoor<T: Real>(keyword_counts: &[usize], cfg: &BenchConfig) -> Result<BenchReport> {
    let corpus = random_corpus(300, cfg.vocab_size, cfg.words_per_doc, cfg.seed);
    let table: EmbeddingTable<T> = random_embeddings(cfg.vocab_size, cfg.n2, cfg.seed);
    let model: LexicalModel<T> = build_model(&corpus)?;
    let n1 = cfg.n1.min(model.matrix.term_count()).min(corpus.len());
    let svd: SvdModel<T> = truncated_svd(&model.matrix.weights, n1)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let key = keygen::<T>(svd.concepts() + cfg.n2, &mut rng)?;

    let mut report = BenchReport::default();
    for &count in keyword_counts {
        let keywords: Vec<String> = model
            .matrix
            .vocabulary
            .terms()
            .iter()
            .choose_multiple(&mut rng, count)
            .into_iter()
            .cloned()
            .collect();
        let mut bytes = 0u64;
        let seconds = median_seconds(cfg.reps, 20, || {
            let td = make_trapdoor(&keywords, &svd, &model.matrix.vocabulary, &table, &key, &mut rng)
                .expect("bench trapdoor");
            let mut buf = Vec::new();
            td.save(&mut buf).expect("in-memory save");
            bytes = buf.len() as u64;
        });
        report.rows.push(BenchRow {
            operation: "trapdoor".into(),
            parameter: count as f64,
            seconds,
            bytes,
        });
    }
    Ok(report)
}

/// Full keyword-list → trapdoor path shared by the bench and the CLI.
pub fn make_trapdoor<T: Real>(
    keywords: &[String],
    svd: &SvdModel<T>,
    vocabulary: &Vocabulary,
    table: &EmbeddingTable<T>,
    key: &SecretKey<T>,
    rng: &mut impl rand::Rng,
) -> Result<Trapdoor<T>> {
    let qv = query_term_vector::<T>(keywords, vocabulary);
    let q1 = svd.project(&qv)?;
    let q2 = query_embedding(keywords, table);
    gen_trapdoor(&q1, &q2, key, TrapdoorParams::default(), rng)
}

/// Single-threaded top-k scoring timed over a sweep of vector dimensions
/// (the swept parameter is n+1). Uses synthetic unit vectors so dimensions
/// are free of corpus effects.
pub fn bench_scoring<T: Real>(
    dims: &[usize],
    doc_count: usize,
    cfg: &BenchConfig,
) -> Result<BenchReport> {
    let mut report = BenchReport::default();
    for &dim in dims {
        assert!(dim >= 3, "n+1 must be at least 3");
        let n = dim - 1;
        let n1 = n / 2;
        let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed ^ dim as u64);
        let key = keygen::<T>(n, &mut rng)?;
        let subs = (0..doc_count)
            .map(|i| {
                let d1: Vector<T> = random_unit(n1, &mut rng);
                let d2: Vector<T> = random_unit(n - n1, &mut rng);
                encrypt_index(&format!("doc{i:05}"), &d1, &d2, &key, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let index = EncryptedIndex::new(subs)?;
        let q1: Vector<T> = random_unit(n1, &mut rng);
        let q2: Vector<T> = random_unit(n - n1, &mut rng);
        let td = gen_trapdoor(&q1, &q2, &key, TrapdoorParams::default(), &mut rng)?;
        let seconds = median_seconds(cfg.reps, 3, || {
            top_k_sequential(&index, &td, 10).expect("bench scoring");
        });
        report.rows.push(BenchRow {
            operation: "query".into(),
            parameter: dim as f64,
            seconds,
            // Two (n+1)-dimension vectors of 64-bit floats per subindex.
            bytes: 2 * dim as u64 * 8,
        });
    }
    Ok(report)
}
