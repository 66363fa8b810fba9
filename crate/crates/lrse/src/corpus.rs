//! Corpus and query ingestion: text normalization plus three input formats
//! (directory of `.txt` files, Cranfield concatenated records, JSON lines).
//!
//! The normalizer is pinned: a fixed stopword list and a small rule-based
//! suffix stemmer, so the same corpus always yields the same token streams.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Fixed English stopword list.
const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "cannot", "could", "did", "do", "does", "doing", "down", "during", "each",
    "few", "for", "from", "further", "had", "has", "have", "having", "he", "her", "here",
    "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "me", "more", "most", "my", "myself", "no", "nor", "not", "now",
    "of", "off", "on", "once", "only", "or", "other", "our", "ours", "ourselves", "out",
    "over", "own", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "theirs", "them", "themselves", "then", "there", "these", "they", "this",
    "those", "through", "to", "too", "under", "until", "up", "very", "was", "we", "were",
    "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "would",
    "you", "your", "yours", "yourself", "yourselves",
];

fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y'))
}

fn ends_double_consonant(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() < 2 {
        return false;
    }
    let last = b[b.len() - 1];
    last == b[b.len() - 2]
        && last.is_ascii_alphabetic()
        && !matches!(last, b'a' | b'e' | b'i' | b'o' | b'u' | b'l' | b's' | b'z')
}

/// Rule-based suffix stemmer (plural and -ed/-ing stripping).
///
/// Idempotent: `stem(stem(w)) == stem(w)` for every token the tokenizer can
/// produce; the property test below checks this over random ASCII words.
pub fn stem(word: &str) -> String {
    let mut w = word.to_string();

    // Plurals.
    if w.ends_with("sses") {
        w.truncate(w.len() - 2);
    } else if w.ends_with("ies") {
        w.truncate(w.len() - 2);
    } else if !w.ends_with("ss") && w.ends_with('s') && w.len() > 3 {
        w.truncate(w.len() - 1);
    }

    // Past / progressive forms.
    if w.ends_with("eed") {
        if w.len() > 4 {
            w.truncate(w.len() - 1);
        }
    } else {
        let stripped = if w.ends_with("ed") && has_vowel(&w[..w.len() - 2]) {
            w.truncate(w.len() - 2);
            true
        } else if w.ends_with("ing") && has_vowel(&w[..w.len() - 3]) {
            w.truncate(w.len() - 3);
            true
        } else {
            false
        };
        if stripped {
            if w.ends_with("at") || w.ends_with("bl") || w.ends_with("iz") {
                w.push('e');
            } else if ends_double_consonant(&w) {
                w.truncate(w.len() - 1);
            }
        }
    }
    w
}

/// Normalize raw text into the token stream used everywhere downstream.
///
/// Splits on non-alphanumeric characters, lowercases, drops stopwords and
/// tokens shorter than two characters, then stems. Deterministic; empty text
/// yields an empty list.
pub fn preprocess(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .map(|t| t.to_lowercase())
        .filter(|t| t.len() >= 2 && !is_stopword(t))
        .map(|t| stem(&t))
        .filter(|t| t.len() >= 2)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        let raw_text = raw_text.into();
        let tokens = preprocess(&raw_text);
        Document {
            doc_id: doc_id.into(),
            raw_text,
            tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Build a corpus, rejecting duplicate doc ids and empty collections.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for d in &documents {
            if !seen.insert(d.doc_id.clone()) {
                return Err(Error::DuplicateDocId(d.doc_id.clone()));
            }
        }
        Ok(Corpus { documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Re-serialize as JSON lines; loading the output with
    /// [`CorpusFormat::Jsonl`] reproduces the corpus exactly.
    pub fn save_jsonl<W: Write>(&self, w: &mut W) -> Result<()> {
        for d in &self.documents {
            let line = serde_json::json!({ "id": d.doc_id, "text": d.raw_text });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub query_id: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub queries: Vec<Query>,
}

impl QuerySet {
    /// Queries that normalize to nothing are dropped.
    pub fn new(raw: Vec<(String, String)>) -> Self {
        let queries = raw
            .into_iter()
            .map(|(query_id, text)| Query {
                query_id,
                keywords: preprocess(&text),
            })
            .filter(|q| !q.keywords.is_empty())
            .collect();
        QuerySet { queries }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    TxtDir,
    Cranfield,
    Jsonl,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "txt-dir" => Ok(CorpusFormat::TxtDir),
            "cranfield" => Ok(CorpusFormat::Cranfield),
            "jsonl" => Ok(CorpusFormat::Jsonl),
            other => Err(Error::InvalidParam(format!(
                "unknown corpus format `{other}` (expected txt-dir, cranfield, or jsonl)"
            ))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CorpusFormat::TxtDir => "txt-dir",
            CorpusFormat::Cranfield => "cranfield",
            CorpusFormat::Jsonl => "jsonl",
        };
        f.write_str(s)
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let documents = match format {
        CorpusFormat::TxtDir => load_txt_dir(path)?,
        CorpusFormat::Cranfield => {
            parse_cranfield(path)?
                .into_iter()
                .map(|(id, text)| Document::new(id, text))
                .collect()
        }
        CorpusFormat::Jsonl => load_jsonl(path)?,
    };
    Corpus::new(documents)
}

/// Load a query set. Cranfield query files reuse the record format; JSONL
/// queries are `{id, text}` objects, one per line.
pub fn load_queries(path: &Path, format: CorpusFormat) -> Result<QuerySet> {
    let raw = match format {
        CorpusFormat::Cranfield => parse_cranfield(path)?,
        CorpusFormat::Jsonl => jsonl_records(path)?,
        CorpusFormat::TxtDir => {
            return Err(Error::InvalidParam(
                "query sets support cranfield and jsonl formats only".into(),
            ))
        }
    };
    Ok(QuerySet::new(raw))
}

fn load_txt_dir(path: &Path) -> Result<Vec<Document>> {
    let mut names: Vec<_> = std::fs::read_dir(path)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    names.sort();
    let mut docs = Vec::new();
    for p in names {
        let id = p
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Format(format!("bad file name {p:?}")))?
            .to_string();
        let text = std::fs::read_to_string(&p)?;
        docs.push(Document::new(id, text));
    }
    Ok(docs)
}

/// Cranfield concatenated record format: `.I <id>` opens a record, `.T`,
/// `.A`, `.B`, `.W` switch sections. Title and body text are kept.
fn parse_cranfield(path: &Path) -> Result<Vec<(String, String)>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut records: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;
    let mut keep_section = false;

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(id) = line.strip_prefix(".I ") {
            if let Some(rec) = current.take() {
                records.push(rec);
            }
            let id = id.trim();
            if id.is_empty() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: "record marker `.I` without an id".into(),
                });
            }
            current = Some((id.to_string(), String::new()));
            keep_section = false;
        } else if line.starts_with(".T") || line.starts_with(".W") {
            keep_section = true;
        } else if line.starts_with(".A") || line.starts_with(".B") || line.starts_with(".X") {
            keep_section = false;
        } else if keep_section {
            if let Some((_, text)) = current.as_mut() {
                text.push_str(&line);
                text.push('\n');
            } else {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: idx + 1,
                    msg: "text before first `.I` record marker".into(),
                });
            }
        }
    }
    if let Some(rec) = current.take() {
        records.push(rec);
    }
    Ok(records)
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: serde_json::Value,
    text: String,
}

fn jsonl_records(path: &Path) -> Result<Vec<(String, String)>> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        let id = match rec.id {
            serde_json::Value::String(s) => s,
            other => other.to_string(),
        };
        out.push((id, rec.text));
    }
    Ok(out)
}

fn load_jsonl(path: &Path) -> Result<Vec<Document>> {
    Ok(jsonl_records(path)?
        .into_iter()
        .map(|(id, text)| Document::new(id, text))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn preprocess_stems_and_drops_stopwords() {
        assert_eq!(preprocess("The flows, the FLOWS!"), vec!["flow", "flow"]);
    }

    #[test]
    fn preprocess_empty_input() {
        assert_eq!(preprocess(""), Vec::<String>::new());
    }

    #[test]
    fn preprocess_all_stopwords() {
        assert_eq!(preprocess("a an the"), Vec::<String>::new());
    }

    #[test]
    fn preprocess_drops_short_tokens() {
        assert_eq!(preprocess("x yz aerodynamics"), vec!["yz", "aerodynamic"]);
    }

    #[test]
    fn stopword_list_is_sorted() {
        let mut sorted = STOPWORDS.to_vec();
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS);
    }

    #[test]
    fn stemmer_examples() {
        assert_eq!(stem("flows"), "flow");
        assert_eq!(stem("flowing"), "flow");
        assert_eq!(stem("hopping"), "hop");
        assert_eq!(stem("agreed"), "agree");
        assert_eq!(stem("ponies"), "poni");
        assert_eq!(stem("caresses"), "caress");
        assert_eq!(stem("relating"), "relate");
    }

    proptest! {
        #[test]
        fn preprocess_idempotent_on_own_tokens(text in "[a-zA-Z ,.!]{0,60}") {
            let tokens = preprocess(&text);
            for t in &tokens {
                prop_assert_eq!(&preprocess(t), &vec![t.clone()], "token {} not stable", t);
            }
        }

        #[test]
        fn stemmer_idempotent(word in "[a-z]{2,12}") {
            let once = stem(&word);
            prop_assert_eq!(stem(&once), once);
        }
    }

    #[test]
    fn txt_dir_corpus() {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [("b", "boundary layer"), ("a", "wing flow"), ("c", "heat")] {
            std::fs::write(dir.path().join(format!("{name}.txt")), text).unwrap();
        }
        std::fs::write(dir.path().join("ignore.dat"), "x").unwrap();
        let corpus = load_corpus(dir.path(), CorpusFormat::TxtDir).unwrap();
        assert_eq!(corpus.len(), 3);
        // Sorted by file name for determinism.
        assert_eq!(corpus.documents[0].doc_id, "a");
        assert_eq!(corpus.documents[0].tokens, vec!["wing", "flow"]);
    }

    #[test]
    fn cranfield_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cran.all");
        let mut f = std::fs::File::create(&path).unwrap();
        write!(
            f,
            ".I 1\n.T\nslipstream study\n.A\nbrenckman,m.\n.W\nexperimental wing study\n.I 2\n.T\nshear flow\n.W\nboundary layer theory\n"
        )
        .unwrap();
        let corpus = load_corpus(&path, CorpusFormat::Cranfield).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.documents[0].doc_id, "1");
        // Author section is excluded.
        assert!(!corpus.documents[0].raw_text.contains("brenckman"));
        assert!(corpus.documents[0].tokens.contains(&"slipstream".to_string()));
    }

    #[test]
    fn jsonl_duplicate_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(
            &path,
            "{\"id\": \"d1\", \"text\": \"alpha\"}\n{\"id\": \"d1\", \"text\": \"beta\"}\n",
        )
        .unwrap();
        let err = load_corpus(&path, CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId(id) if id == "d1"));
    }

    #[test]
    fn jsonl_malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(&path, "{\"id\": \"d1\", \"text\": \"alpha\"}\nnot json\n").unwrap();
        let err = load_corpus(&path, CorpusFormat::Jsonl).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus = Corpus::new(vec![
            Document::new("d1", "supersonic wing flow"),
            Document::new("d2", "boundary layers in heat transfer"),
        ])
        .unwrap();
        let mut buf = Vec::new();
        corpus.save_jsonl(&mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("round.jsonl");
        std::fs::write(&path, &buf).unwrap();
        let reloaded = load_corpus(&path, CorpusFormat::Jsonl).unwrap();
        assert_eq!(reloaded, corpus);
    }

    #[test]
    fn query_set_drops_empty_queries() {
        let qs = QuerySet::new(vec![
            ("q1".into(), "lift distribution".into()),
            ("q2".into(), "a the".into()),
        ]);
        assert_eq!(qs.queries.len(), 1);
        assert_eq!(qs.queries[0].keywords, vec!["lift", "distribution"]);
    }
}
