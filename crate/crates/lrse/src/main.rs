//! Command-line front end: key generation, index construction, trapdoor
//! generation, encrypted querying, quality evaluation, and timing sweeps,
//! all communicating through files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use lrse::bench::{bench_index_build, bench_scoring, bench_trapdoor, make_trapdoor, BenchConfig, BenchReport};
use lrse::corpus::{load_corpus, load_queries, Corpus, CorpusFormat};
use lrse::embedding::{doc_embedding, load_embeddings, EmbeddingTable};
use lrse::eval::{load_qrels, run_eval, EvalParams, Scheme};
use lrse::io;
use lrse::knn::{
    decrypt_payload, encrypt_index, encrypt_payload, keygen, SecretKey, Trapdoor,
    PAYLOAD_NONCE_LEN,
};
use lrse::lexical::{build_model, LexicalModel, Vocabulary};
use lrse::server::{top_k, EncryptedIndex};
use lrse::svd::{truncated_svd, SvdModel};

#[derive(Parser)]
#[command(name = "lrse", about = "Searchable encryption with ranked multi-keyword queries", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a secret key for vectors of dimension n1 + n2 + 1.
    Keygen(KeygenArgs),
    /// Build the encrypted index, payload store, and owner bundle.
    BuildIndex(BuildIndexArgs),
    /// Generate an encrypted query trapdoor from keywords.
    Trapdoor(TrapdoorArgs),
    /// Rank an encrypted index against a trapdoor.
    Query(QueryArgs),
    /// Compare ranking quality against the plaintext baselines.
    Eval(EvalArgs),
    /// Run the timing sweeps and emit a CSV report.
    Bench(BenchArgs),
}

/// Flat `key=value` configuration file; command-line flags take precedence,
/// built-in defaults fill whatever remains.
#[derive(Debug, Default)]
struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("{}:{}: expected key=value", path.display(), i + 1);
            };
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.0.get(key).map(PathBuf::from)
    }
}

/// flag > config file > default.
fn resolve<T>(flag: Option<T>, file: Option<T>, default: Option<T>, name: &str) -> anyhow::Result<T> {
    flag.or(file)
        .or(default)
        .with_context(|| format!("missing required setting `{name}` (flag or config file)"))
}

#[derive(Args)]
struct KeygenArgs {
    /// Concept-space dimension n1.
    #[arg(long)]
    n1: Option<usize>,
    /// Embedding-space dimension n2.
    #[arg(long)]
    n2: Option<usize>,
    /// RNG seed for the key material. No default: key material is never
    /// derived from a silent seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output key file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BuildIndexArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus format: txt-dir, cranfield, or jsonl.
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Secret key produced by `keygen`.
    #[arg(long)]
    key: Option<PathBuf>,
    #[arg(long)]
    n1: Option<usize>,
    /// Seed for the per-dimension index splitting.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory receiving index.bin, payloads.bin, and bundle.bin.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TrapdoorArgs {
    /// Owner bundle written by `build-index`.
    #[arg(long)]
    bundle: Option<PathBuf>,
    /// Secret key file.
    #[arg(long)]
    key: Option<PathBuf>,
    /// Embedding file; defaults to the path recorded in the bundle.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Query keywords, space separated.
    #[arg(long)]
    keywords: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    trapdoor: Option<PathBuf>,
    #[arg(short, long)]
    k: Option<usize>,
    /// Ranked-results CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Payload store; with --key, decrypts the returned documents.
    #[arg(long)]
    payloads: Option<PathBuf>,
    #[arg(long)]
    key: Option<PathBuf>,
    /// Directory receiving the decrypted documents.
    #[arg(long)]
    decrypt_dir: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-query CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Worker threads (1 pins the trend checks to a single core).
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Document counts for the index-build sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [250usize, 500, 1000])]
    docs: Vec<usize>,
    /// Query keyword counts for the trapdoor sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 25])]
    keywords: Vec<usize>,
    /// Vector dimensions (n+1) for the scoring sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [101usize, 201, 401])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Keygen(a) => cmd_keygen(a),
        Command::BuildIndex(a) => cmd_build_index(a),
        Command::Trapdoor(a) => cmd_trapdoor(a),
        Command::Query(a) => cmd_query(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn cmd_keygen(args: KeygenArgs) -> anyhow::Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let n1 = resolve(args.n1, cfg.get("n1")?, Some(300), "n1")?;
    let n2 = resolve(args.n2, cfg.get("n2")?, Some(100), "n2")?;
    let seed = resolve(args.seed, cfg.get("seed")?, None, "seed")?;
    let out = resolve(args.out, cfg.path("key"), None, "out")?;
    if n1 == 0 {
        bail!("n1 must be at least 1");
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let key = keygen::<f64>(n1 + n2, &mut rng)?;
    key.save(&mut create(&out)?)?;
    eprintln!("wrote {}-dimension key to {}", key.dim(), out.display());
    Ok(())
}

fn cmd_build_index(args: BuildIndexArgs) -> anyhow::Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus_path = resolve(args.corpus, cfg.path("corpus"), None, "corpus")?;
    let format: CorpusFormat = resolve(
        args.format,
        cfg.get::<CorpusFormat>("format")?,
        Some(CorpusFormat::Jsonl),
        "format",
    )?;
    let embeddings_path = resolve(args.embeddings, cfg.path("embeddings"), None, "embeddings")?;
    let key_path = resolve(args.key, cfg.path("key"), None, "key")?;
    let n1 = resolve(args.n1, cfg.get("n1")?, Some(300), "n1")?;
    let seed = resolve(args.seed, cfg.get("seed")?, None, "seed")?;
    let out_dir = resolve(args.out_dir, cfg.path("out_dir"), None, "out-dir")?;

    let corpus = load_corpus(&corpus_path, format)?;
    let table: EmbeddingTable<f64> = load_embeddings(&embeddings_path)?;
    let key = SecretKey::<f64>::load(&mut open(&key_path)?)?;

    let model: LexicalModel<f64> = build_model(&corpus)?;
    let rank_cap = model.matrix.term_count().min(corpus.len());
    if n1 > rank_cap {
        bail!("n1 = {n1} exceeds min(vocabulary, documents) = {rank_cap}");
    }
    let svd = truncated_svd(&model.matrix.weights, n1)?;
    let n2 = table.dimension();
    if svd.concepts() + n2 != key.n() {
        bail!(
            "key dimension mismatch: key expects n = {}, corpus gives n1 = {} and n2 = {} \
             (rank deficiency can shrink n1; regenerate the key to match)",
            key.n(),
            svd.concepts(),
            n2
        );
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut subindexes = Vec::with_capacity(corpus.len());
    for (i, doc) in corpus.documents.iter().enumerate() {
        let d1 = svd.project(&model.matrix.weights.column(i).into_owned())?;
        let d2 = doc_embedding(&model.doc_keywords[i], &table);
        subindexes.push(encrypt_index(&doc.doc_id, &d1, &d2, &key, &mut rng)?);
    }
    let index = EncryptedIndex::new(subindexes)?;

    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    index.save(&mut create(&out_dir.join("index.bin"))?)?;
    write_payload_store(&out_dir.join("payloads.bin"), &corpus, &key)?;
    write_bundle(
        &out_dir.join("bundle.bin"),
        &model.matrix.vocabulary,
        &svd,
        &embeddings_path,
    )?;
    eprintln!(
        "indexed {} documents into {} (n = {})",
        corpus.len(),
        out_dir.display(),
        key.n()
    );
    Ok(())
}

fn cmd_trapdoor(args: TrapdoorArgs) -> anyhow::Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let bundle_path = resolve(args.bundle, cfg.path("bundle"), None, "bundle")?;
    let key_path = resolve(args.key, cfg.path("key"), None, "key")?;
    let keywords_raw = resolve(args.keywords, cfg.get("keywords")?, None, "keywords")?;
    let seed = resolve(args.seed, cfg.get("seed")?, None, "seed")?;
    let out = resolve(args.out, cfg.path("trapdoor"), None, "out")?;

    let (vocabulary, svd, bundled_embeddings) = read_bundle(&bundle_path)?;
    let embeddings_path = args
        .embeddings
        .or(cfg.path("embeddings"))
        .unwrap_or(bundled_embeddings);
    let table: EmbeddingTable<f64> = load_embeddings(&embeddings_path)?;
    let key = SecretKey::<f64>::load(&mut open(&key_path)?)?;
    if svd.concepts() + table.dimension() != key.n() {
        bail!(
            "key expects n = {}, bundle gives n1 = {} and n2 = {}",
            key.n(),
            svd.concepts(),
            table.dimension()
        );
    }

    let keywords: Vec<String> = lrse::corpus::preprocess(&keywords_raw);
    if keywords.is_empty() {
        bail!("no usable keywords after preprocessing");
    }
    let in_vocab = keywords.iter().any(|k| vocabulary.index_of(k).is_some());
    let in_table = keywords.iter().any(|k| table.get(k).is_some());
    if !in_vocab && !in_table {
        eprintln!("warning: all keywords are out of vocabulary; trapdoor has zero query direction");
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let td = make_trapdoor(&keywords, &svd, &vocabulary, &table, &key, &mut rng)?;
    td.save(&mut create(&out)?)?;
    eprintln!("wrote trapdoor for {} keywords to {}", keywords.len(), out.display());
    Ok(())
}

fn cmd_query(args: QueryArgs) -> anyhow::Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let index_path = resolve(args.index, cfg.path("index"), None, "index")?;
    let trapdoor_path = resolve(args.trapdoor, cfg.path("trapdoor"), None, "trapdoor")?;
    let k = resolve(args.k, cfg.get("k")?, Some(10), "k")?;
    if k == 0 {
        bail!("k must be at least 1");
    }

    let index = EncryptedIndex::<f64>::load(&mut open(&index_path)?)?;
    let trapdoor = Trapdoor::<f64>::load(&mut open(&trapdoor_path)?)?;
    let results = top_k(&index, &trapdoor, k)?;

    match &args.out {
        Some(path) => results.write_csv(&mut create(path)?)?,
        None => results.write_csv(&mut std::io::stdout().lock())?,
    }

    if let Some(payloads) = args.payloads.or(cfg.path("payloads")) {
        let key_path = resolve(args.key, cfg.path("key"), None, "key")?;
        let dir = resolve(args.decrypt_dir, cfg.path("decrypt_dir"), None, "decrypt-dir")?;
        let key = SecretKey::<f64>::load(&mut open(&key_path)?)?;
        let store = read_payload_store(&payloads)?;
        std::fs::create_dir_all(&dir)?;
        for (doc_id, _) in &results.entries {
            let Some((nonce, ciphertext)) = store.get(doc_id) else {
                bail!("payload store has no entry for returned doc `{doc_id}`");
            };
            let plaintext = decrypt_payload(ciphertext, key.payload_key(), nonce)?;
            std::fs::write(dir.join(format!("{doc_id}.txt")), plaintext)?;
        }
        eprintln!("decrypted {} documents into {}", results.entries.len(), dir.display());
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> anyhow::Result<()> {
    let cfg = FileConfig::load(args.config.as_deref())?;
    let corpus_path = resolve(args.corpus, cfg.path("corpus"), None, "corpus")?;
    let format: CorpusFormat = resolve(
        args.format,
        cfg.get::<CorpusFormat>("format")?,
        Some(CorpusFormat::Jsonl),
        "format",
    )?;
    let queries_path = resolve(args.queries, cfg.path("queries"), None, "queries")?;
    let qrels_path = resolve(args.qrels, cfg.path("qrels"), None, "qrels")?;
    let embeddings_path = resolve(args.embeddings, cfg.path("embeddings"), None, "embeddings")?;
    let n1 = resolve(args.n1, cfg.get("n1")?, Some(300), "n1")?;
    let seed = resolve(args.seed, cfg.get("seed")?, Some(0), "seed")?;

    let corpus = load_corpus(&corpus_path, format)?;
    let queries = load_queries(&queries_path, format)?;
    let qrels = load_qrels(&qrels_path, |w| eprintln!("warning: {w}"))?;
    let table: EmbeddingTable<f64> = load_embeddings(&embeddings_path)?;

    let schemes = [Scheme::Lrse, Scheme::TfIdf, Scheme::MrseI];
    let report = run_eval(
        &corpus,
        &queries,
        &qrels,
        &table,
        &schemes,
        &[3, 10],
        &EvalParams {
            n1: n1.min(corpus.len()),
            seed,
            ..Default::default()
        },
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &args.out.or(cfg.path("eval_out")) {
        report.write_csv(&mut create(out)?)?;
    }
    report.write_summary(&mut std::io::stdout().lock(), &schemes)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let _ = FileConfig::load(args.config.as_deref())?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads)
        .build_global()
        .context("configuring thread pool")?;
    let cfg = BenchConfig {
        seed: args.seed,
        reps: args.reps,
        ..Default::default()
    };
    let mut report = BenchReport::default();
    report.rows.extend(bench_index_build::<f64>(&args.docs, &cfg)?.rows);
    report.rows.extend(bench_trapdoor::<f64>(&args.keywords, &cfg)?.rows);
    report.rows.extend(bench_scoring::<f64>(&args.dims, 2000, &cfg)?.rows);
    match &args.out {
        Some(path) => report.write_csv(&mut create(path)?)?,
        None => report.write_csv(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

// ---- artifact plumbing -------------------------------------------------

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("opening {}", path.display())
    })?))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("creating {}", path.display())
    })?))
}

/// Deterministic per-record nonce: the record index, little-endian. Each
/// `keygen` seed yields a fresh payload key, and a key encrypts one corpus,
/// so nonces never repeat under one key.
fn payload_nonce(record: u64) -> [u8; PAYLOAD_NONCE_LEN] {
    let mut nonce = [0u8; PAYLOAD_NONCE_LEN];
    nonce[..8].copy_from_slice(&record.to_le_bytes());
    nonce
}

fn write_payload_store(path: &Path, corpus: &Corpus, key: &SecretKey<f64>) -> anyhow::Result<()> {
    let mut w = create(path)?;
    io::write_magic(&mut w, io::PAYLOAD_MAGIC)?;
    io::write_u32(&mut w, corpus.len() as u32)?;
    for (i, doc) in corpus.documents.iter().enumerate() {
        let nonce = payload_nonce(i as u64);
        let ciphertext = encrypt_payload(doc.raw_text.as_bytes(), key.payload_key(), &nonce)?;
        io::write_string(&mut w, &doc.doc_id)?;
        io::write_bytes(&mut w, &nonce)?;
        io::write_bytes(&mut w, &ciphertext)?;
    }
    Ok(())
}

type PayloadStore = HashMap<String, ([u8; PAYLOAD_NONCE_LEN], Vec<u8>)>;

fn read_payload_store(path: &Path) -> anyhow::Result<PayloadStore> {
    let mut r = open(path)?;
    io::expect_magic(&mut r, io::PAYLOAD_MAGIC)?;
    let count = io::read_u32(&mut r)? as usize;
    let mut store = HashMap::with_capacity(count);
    for _ in 0..count {
        let doc_id = io::read_string(&mut r)?;
        let nonce_bytes = io::read_bytes(&mut r)?;
        let nonce: [u8; PAYLOAD_NONCE_LEN] = nonce_bytes
            .try_into()
            .map_err(|_| anyhow::anyhow!("bad nonce length in {}", path.display()))?;
        let ciphertext = io::read_bytes(&mut r)?;
        store.insert(doc_id, (nonce, ciphertext));
    }
    Ok(store)
}

/// Owner bundle: vocabulary, SVD factors, and the embedding file reference
/// needed to turn keywords into trapdoors later.
fn write_bundle(
    path: &Path,
    vocabulary: &Vocabulary,
    svd: &SvdModel<f64>,
    embeddings_path: &Path,
) -> anyhow::Result<()> {
    let mut w = create(path)?;
    io::write_magic(&mut w, io::BUNDLE_MAGIC)?;
    io::write_u32(&mut w, vocabulary.len() as u32)?;
    for term in vocabulary.terms() {
        io::write_string(&mut w, term)?;
    }
    svd.save(&mut w)?;
    io::write_string(&mut w, &embeddings_path.display().to_string())?;
    Ok(())
}

fn read_bundle(path: &Path) -> anyhow::Result<(Vocabulary, SvdModel<f64>, PathBuf)> {
    let mut r = open(path)?;
    io::expect_magic(&mut r, io::BUNDLE_MAGIC)?;
    let term_count = io::read_u32(&mut r)? as usize;
    let mut terms = Vec::with_capacity(term_count);
    for _ in 0..term_count {
        terms.push(io::read_string(&mut r)?);
    }
    let svd = SvdModel::<f64>::load(&mut r)?;
    let embeddings = PathBuf::from(io::read_string(&mut r)?);
    Ok((Vocabulary::new(terms), svd, embeddings))
}
