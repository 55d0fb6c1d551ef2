//! News items, labeled-subset selection and document embeddings.
//!
//! Two embedding routes are supported: ingesting precomputed vectors from a
//! text file, and a built-in hashed TF-IDF embedder that needs no training.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// A single news item. `label` is 1 for the interest (fake) class and 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

/// An ordered collection of news items plus the labeled-positive subset.
#[derive(Debug, Clone)]
pub struct Corpus {
    items: Vec<NewsItem>,
    labeled: Vec<usize>,
    index: HashMap<String, usize>,
}

impl Corpus {
    /// Validates ids and texts. The labeled subset starts empty.
    pub fn new(items: Vec<NewsItem>) -> Result<Self> {
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item.id.is_empty() {
                return Err(Error::parse(format!("item {i}"), "empty id"));
            }
            if item.text.trim().is_empty() {
                return Err(Error::InvalidRecord {
                    id: item.id.clone(),
                    message: "empty text".into(),
                });
            }
            if let Some(label) = item.label {
                if label > 1 {
                    return Err(Error::InvalidRecord {
                        id: item.id.clone(),
                        message: format!("label {label} is not 0 or 1"),
                    });
                }
            }
            if index.insert(item.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(item.id.clone()));
            }
        }
        Ok(Self {
            items,
            labeled: Vec::new(),
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[NewsItem] {
        &self.items
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Indices of the labeled-positive items, ascending.
    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn labeled_ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.labeled.iter().map(|&i| self.items[i].id.as_str())
    }

    /// Indices of every item outside the labeled subset, ascending.
    pub fn unlabeled(&self) -> Vec<usize> {
        complement(self.len(), &self.labeled)
    }

    pub fn has_labels(&self) -> bool {
        self.items.iter().any(|item| item.label.is_some())
    }

    /// Indices of items whose ground-truth label is 1.
    pub fn positives(&self) -> Vec<usize> {
        self.items
            .iter()
            .enumerate()
            .filter(|(_, item)| item.label == Some(1))
            .map(|(i, _)| i)
            .collect()
    }

    /// Ground truth as a dense vector; fails if any item is unlabeled.
    pub fn ground_truth(&self) -> Result<Vec<u8>> {
        self.items
            .iter()
            .map(|item| {
                item.label.ok_or_else(|| Error::InvalidRecord {
                    id: item.id.clone(),
                    message: "no ground-truth label".into(),
                })
            })
            .collect()
    }

    /// Replaces the labeled subset. Every index must refer to a positive item.
    pub fn set_labeled(&mut self, mut labeled: Vec<usize>) -> Result<()> {
        labeled.sort_unstable();
        labeled.dedup();
        for &i in &labeled {
            let item = self
                .items
                .get(i)
                .ok_or_else(|| Error::param("labeled set", format!("index {i} out of range")))?;
            if item.label != Some(1) {
                return Err(Error::InvalidRecord {
                    id: item.id.clone(),
                    message: "labeled items must carry label 1".into(),
                });
            }
        }
        self.labeled = labeled;
        Ok(())
    }

    /// Draws `⌊fraction · #positives⌋` positives uniformly without replacement.
    pub fn draw_labeled(&self, fraction: f64, seed: u64) -> Result<Vec<usize>> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::param(
                "labeled_fraction",
                format!("{fraction} is outside [0, 1]"),
            ));
        }
        if fraction == 0.0 {
            return Ok(Vec::new());
        }
        if !self.has_labels() {
            return Err(Error::param(
                "labeled_fraction",
                "a labeled fraction was requested but the dataset has no label column",
            ));
        }
        let positives = self.positives();
        let amount = floor_count(fraction, positives.len());
        let mut rng = seed::rng(seed);
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, positives.len(), amount)
            .into_iter()
            .map(|i| positives[i])
            .collect();
        picked.sort_unstable();
        Ok(picked)
    }

    pub fn with_labeled_fraction(mut self, fraction: f64, seed: u64) -> Result<Self> {
        let labeled = self.draw_labeled(fraction, seed)?;
        self.labeled = labeled;
        Ok(self)
    }
}

/// `⌊fraction · n⌋`, robust to products such as `0.29 * 100 = 28.999…`.
pub(crate) fn floor_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + 1e-9).floor() as usize
}

/// `⌈fraction · n⌉`, robust to products such as `0.1 * 30 = 3.0000…4`.
pub(crate) fn ceil_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

pub(crate) fn complement(n: usize, sorted: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(n.saturating_sub(sorted.len()));
    let mut it = sorted.iter().peekable();
    for i in 0..n {
        if it.peek() == Some(&&i) {
            it.next();
        } else {
            out.push(i);
        }
    }
    out
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
    label: Option<serde_json::Value>,
}

/// Reads a JSON-lines dataset without selecting any labeled items.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let location = || format!("{}:{}", path.display(), lineno + 1);
        let raw: RawRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(location(), e.to_string()))?;
        let id = match raw.id {
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(_) => return Err(Error::parse(location(), "`id` must be a string")),
            None => return Err(Error::parse(location(), "missing `id`")),
        };
        let text = raw.text.ok_or_else(|| Error::InvalidRecord {
            id: id.clone(),
            message: "missing `text`".into(),
        })?;
        let label = match raw.label {
            None | Some(serde_json::Value::Null) => None,
            Some(value) => match value.as_u64() {
                Some(l @ (0 | 1)) => Some(l as u8),
                _ => {
                    return Err(Error::InvalidRecord {
                        id,
                        message: format!("label {value} is not 0 or 1"),
                    })
                }
            },
        };
        items.push(NewsItem { id, text, label });
    }
    Corpus::new(items)
}

/// Reads a dataset and marks `⌊labeled_fraction · #positives⌋` random positives as labeled.
pub fn load_corpus(path: &Path, labeled_fraction: f64, seed: u64) -> Result<Corpus> {
    read_corpus(path)?.with_labeled_fraction(labeled_fraction, seed)
}

/// Dense `n × dim` matrix of document vectors, rows in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: Array2<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: Array2<f64>) -> Result<Self> {
        if rows.ncols() == 0 {
            return Err(Error::param("embedding dim", "must be at least 1"));
        }
        if let Some((i, _)) = rows
            .outer_iter()
            .enumerate()
            .find(|(_, row)| row.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidRecord {
                id: format!("row {i}"),
                message: "non-finite embedding value".into(),
            });
        }
        Ok(Self { rows })
    }

    pub fn n_items(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.rows.row(i)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.rows
    }

    pub fn into_array(self) -> Array2<f64> {
        self.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbedderConfig {
    pub dim: usize,
    pub lowercase: bool,
    pub stopword_path: Option<PathBuf>,
    pub seed: u64,
}

impl Default for EmbedderConfig {
    fn default() -> Self {
        Self {
            dim: 500,
            lowercase: true,
            stopword_path: None,
            seed: 0,
        }
    }
}

/// Tokenizer with an optional stopword list, loaded once.
#[derive(Debug, Clone, Default)]
pub struct Preprocessor {
    lowercase: bool,
    stopwords: HashSet<String>,
}

impl Preprocessor {
    pub fn new(config: &EmbedderConfig) -> Result<Self> {
        let mut stopwords = HashSet::new();
        if let Some(path) = &config.stopword_path {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
                stopwords.insert(if config.lowercase {
                    line.to_lowercase()
                } else {
                    line.to_string()
                });
            }
        }
        Ok(Self {
            lowercase: config.lowercase,
            stopwords,
        })
    }

    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords.extend(words.into_iter().map(Into::into));
        self
    }

    /// Splits on anything that is not alphanumeric, then folds case and drops stopwords.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| {
                if self.lowercase {
                    t.to_lowercase()
                } else {
                    t.to_string()
                }
            })
            .filter(|t| !self.stopwords.contains(t))
            .collect()
    }
}

pub fn preprocess(text: &str, config: &EmbedderConfig) -> Result<Vec<String>> {
    Ok(Preprocessor::new(config)?.tokens(text))
}

fn bucket(token: &str, seed: u64, dim: usize) -> usize {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    (u64::from_le_bytes(bytes) % dim as u64) as usize
}

/// Hashed TF-IDF embedding with smoothed IDF `ln((1 + N) / (1 + df)) + 1`.
///
/// Rows are L2-normalized; an item with no surviving tokens embeds to zero.
pub fn embed_corpus(corpus: &Corpus, config: &EmbedderConfig) -> Result<EmbeddingMatrix> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    if config.dim < 1 {
        return Err(Error::param("embedder dim", "must be at least 1"));
    }
    let pre = Preprocessor::new(config)?;
    let dim = config.dim;

    let counts: Vec<Vec<(usize, f64)>> = corpus
        .items()
        .par_iter()
        .map(|item| {
            let mut tf: HashMap<usize, f64> = HashMap::new();
            for token in pre.tokens(&item.text) {
                *tf.entry(bucket(&token, config.seed, dim)).or_default() += 1.0;
            }
            let mut tf: Vec<_> = tf.into_iter().collect();
            tf.sort_unstable_by_key(|&(b, _)| b);
            tf
        })
        .collect();

    let mut df = vec![0usize; dim];
    for doc in &counts {
        for &(b, _) in doc {
            df[b] += 1;
        }
    }
    let n = corpus.len() as f64;
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();

    let mut rows = Array2::zeros((corpus.len(), dim));
    for (i, doc) in counts.iter().enumerate() {
        let norm = doc
            .iter()
            .map(|&(b, c)| (c * idf[b]).powi(2))
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            continue;
        }
        for &(b, c) in doc {
            rows[[i, b]] = c * idf[b] / norm;
        }
    }
    EmbeddingMatrix::new(rows)
}

/// Reads an embedding file (`n dim` header, then `id v1 … v_dim`) and aligns it to corpus order.
pub fn load_embeddings(path: &Path, corpus: &Corpus) -> Result<EmbeddingMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let location = |lineno: usize| format!("{}:{}", path.display(), lineno + 1);

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(location(0), "missing `n dim` header"))?;
    let mut fields = header.split_whitespace();
    let mut header_field = |name: &str| -> Result<usize> {
        fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| Error::parse(location(hline), format!("bad header field `{name}`")))
    };
    let n = header_field("n")?;
    let dim = header_field("dim")?;
    if n != corpus.len() {
        return Err(Error::DimensionMismatch(format!(
            "embedding file has {n} rows but the corpus has {} items",
            corpus.len()
        )));
    }
    if dim == 0 {
        return Err(Error::param("embedding dim", "must be at least 1"));
    }

    let mut rows = Array2::zeros((n, dim));
    let mut seen = vec![false; n];
    let mut count = 0;
    for (lineno, line) in lines {
        let mut fields = line.split_whitespace();
        let id = fields.next().unwrap_or_default();
        let row = corpus
            .position(id)
            .ok_or_else(|| Error::UnknownId(id.to_string()))?;
        if std::mem::replace(&mut seen[row], true) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let values: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::parse(location(lineno), format!("row `{id}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "row `{id}` has {} values, expected {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord {
                id: id.to_string(),
                message: "non-finite embedding value".into(),
            });
        }
        rows.row_mut(row).assign(&ArrayView1::from(&values));
        count += 1;
    }
    if count != n {
        return Err(Error::DimensionMismatch(format!(
            "header declares {n} rows but the file has {count}"
        )));
    }
    EmbeddingMatrix::new(rows)
}

/// Writes embeddings in the format read by [`load_embeddings`]. Values round-trip exactly.
pub fn write_embeddings(path: &Path, corpus: &Corpus, x: &EmbeddingMatrix) -> Result<()> {
    if corpus.len() != x.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "{} items but {} embedding rows",
            corpus.len(),
            x.n_items()
        )));
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{} {}", x.n_items(), x.dim())?;
        for (item, row) in corpus.items().iter().zip(x.as_array().outer_iter()) {
            write!(out, "{}", item.id)?;
            for v in row {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Named lists of item positions, as read back by [`read_id_lists`].
pub type IdLists = Vec<(String, Vec<usize>)>;

/// Writes `# <header>` followed by one `<name> <id> <id> …` line per list.
pub fn write_id_lists(
    path: &Path,
    corpus: &Corpus,
    header: &str,
    lists: &[(&str, &[usize])],
) -> Result<()> {
    let mut body = format!("# {header}\n");
    for (name, nodes) in lists {
        body.push_str(name);
        for &v in *nodes {
            let item = corpus.items.get(v).ok_or_else(|| {
                Error::param(
                    "node",
                    format!("{v} out of range for {} items", corpus.len()),
                )
            })?;
            body.push(' ');
            body.push_str(&item.id);
        }
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_id_lists`]: the header (without `#`) and
/// the named lists in file order, each mapped to sorted item positions.
pub fn read_id_lists(path: &Path, corpus: &Corpus) -> Result<(String, IdLists)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|l| l.strip_prefix('#'))
        .ok_or_else(|| Error::parse(path.display().to_string(), "missing `#` header line"))?
        .trim()
        .to_string();
    let mut lists = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let mut fields = line.split_whitespace();
        let name = fields.next().expect("line is not blank").to_string();
        let mut nodes = fields
            .map(|id| {
                corpus
                    .position(id)
                    .ok_or_else(|| Error::UnknownId(id.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        nodes.sort_unstable();
        lists.push((name, nodes));
    }
    Ok((header, lists))
}

/// Value of `key=value` in a whitespace-separated header.
pub fn header_field<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    header
        .split_whitespace()
        .find_map(|field| field.strip_prefix(key)?.strip_prefix('='))
}

/// Takes the list called `name` out of [`read_id_lists`] output.
pub fn take_list(
    path: &Path,
    lists: &mut Vec<(String, Vec<usize>)>,
    name: &str,
) -> Result<Vec<usize>> {
    let at = lists.iter().position(|(n, _)| n == name).ok_or_else(|| {
        Error::parse(path.display().to_string(), format!("missing `{name}` list"))
    })?;
    Ok(lists.remove(at).1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, text: &str, label: Option<u8>) -> NewsItem {
        NewsItem {
            id: id.into(),
            text: text.into(),
            label,
        }
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn zero_fraction_labels_nothing() {
        let f = write_tmp(
            "{\"id\":\"a\",\"text\":\"one\",\"label\":1}\n\
             {\"id\":\"b\",\"text\":\"two\",\"label\":0}\n\
             {\"id\":\"c\",\"text\":\"three\"}\n",
        );
        let corpus = load_corpus(f.path(), 0.0, 1).unwrap();
        assert_eq!(corpus.len(), 3);
        assert!(corpus.labeled().is_empty());
    }

    #[test]
    fn empty_text_names_the_record() {
        let f = write_tmp("{\"id\":\"ok\",\"text\":\"x\"}\n{\"id\":\"bad\",\"text\":\"  \"}\n");
        let err = read_corpus(f.path()).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
    }

    #[test]
    fn malformed_records_are_rejected() {
        let dup = write_tmp("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
        assert!(matches!(
            read_corpus(dup.path()),
            Err(Error::DuplicateId(_))
        ));
        let missing = write_tmp("{\"text\":\"x\"}\n");
        assert!(matches!(
            read_corpus(missing.path()),
            Err(Error::Parse { .. })
        ));
        let label = write_tmp("{\"id\":\"a\",\"text\":\"x\",\"label\":2}\n");
        assert!(matches!(
            read_corpus(label.path()),
            Err(Error::InvalidRecord { .. })
        ));
        let garbage = write_tmp("not json\n");
        assert!(matches!(
            read_corpus(garbage.path()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn fraction_without_labels_is_an_error() {
        let f = write_tmp("{\"id\":\"a\",\"text\":\"x\"}\n");
        assert!(load_corpus(f.path(), 0.5, 0).is_err());
    }

    #[test]
    fn dataset_at_largest_english_scale_loads() {
        // 7003 items, 1705 positives: the size of the curated gossip-news dataset.
        let mut body = String::new();
        for i in 0..7003 {
            let label = u8::from(i < 1705);
            body.push_str(&format!(
                "{{\"id\":\"n{i}\",\"text\":\"story {i}\",\"label\":{label}}}\n"
            ));
        }
        let f = write_tmp(&body);
        let corpus = load_corpus(f.path(), 0.1, 3).unwrap();
        assert_eq!(corpus.len(), 7003);
        assert_eq!(corpus.positives().len(), 1705);
        assert_eq!(corpus.labeled().len(), 170);
    }

    #[test]
    fn labeled_draw_is_seeded_and_positive() {
        let items = (0..50)
            .map(|i| item(&format!("i{i}"), "t", Some(u8::from(i % 2 == 0))))
            .collect();
        let corpus = Corpus::new(items).unwrap();
        let a = corpus.draw_labeled(0.3, 11).unwrap();
        assert_eq!(a, corpus.draw_labeled(0.3, 11).unwrap());
        assert_eq!(a.len(), 7);
        assert!(a.iter().all(|&i| i % 2 == 0));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn preprocess_cases() {
        let cfg = EmbedderConfig::default();
        let pre = Preprocessor::new(&cfg).unwrap().with_stopwords(["the"]);
        assert!(pre.tokens("The THE the").is_empty());
        assert_eq!(
            preprocess("Graph graphs GRAPH", &cfg).unwrap(),
            vec!["graph", "graphs", "graph"]
        );
        assert_eq!(
            preprocess("Hello, world! x-y", &cfg).unwrap(),
            preprocess("Hello, world! x-y", &cfg).unwrap()
        );
        let missing = EmbedderConfig {
            stopword_path: Some("/nonexistent/stopwords.txt".into()),
            ..cfg
        };
        assert!(preprocess("a", &missing).is_err());
    }

    #[test]
    fn stopword_file_is_read() {
        let f = write_tmp("the\nA\n");
        let cfg = EmbedderConfig {
            stopword_path: Some(f.path().to_path_buf()),
            ..EmbedderConfig::default()
        };
        assert_eq!(
            preprocess("a cat, THE hat", &cfg).unwrap(),
            vec!["cat", "hat"]
        );
    }

    #[test]
    fn embedder_contract() {
        let corpus = Corpus::new(vec![
            item("a", "fake claims spread fast", None),
            item("b", "fake claims spread fast", None),
            item("c", "council approves budget", None),
            item("d", "!!!", None),
        ])
        .unwrap();
        let cfg = EmbedderConfig::default();
        let x = embed_corpus(&corpus, &cfg).unwrap();
        assert_eq!(x.dim(), 500);
        assert_eq!(x.row(0), x.row(1));
        for i in 0..3 {
            let norm = x.row(i).dot(&x.row(i)).sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
        assert!(x.row(3).iter().all(|&v| v == 0.0));
        assert_eq!(x, embed_corpus(&corpus, &cfg).unwrap());

        let single = Corpus::new(vec![item("s", "only one", None)]).unwrap();
        let x = embed_corpus(&single, &cfg).unwrap();
        assert!((x.row(0).dot(&x.row(0)).sqrt() - 1.0).abs() < 1e-9);

        let bad = EmbedderConfig { dim: 0, ..cfg };
        assert!(embed_corpus(&single, &bad).is_err());
    }

    #[test]
    fn embeddings_align_to_corpus_order() {
        let corpus = Corpus::new(vec![item("a", "x", None), item("b", "y", None)]).unwrap();
        let f = write_tmp("2 3\nb 4 5 6\na 1 2 3\n");
        let x = load_embeddings(f.path(), &corpus).unwrap();
        assert_eq!(x.row(0).to_vec(), vec![1.0, 2.0, 3.0]);
        assert_eq!(x.row(1).to_vec(), vec![4.0, 5.0, 6.0]);

        let wrong_n = write_tmp("3 3\nb 4 5 6\na 1 2 3\n");
        assert!(matches!(
            load_embeddings(wrong_n.path(), &corpus),
            Err(Error::DimensionMismatch(_))
        ));
        let nan = write_tmp("2 1\na 1\nb NaN\n");
        let err = load_embeddings(nan.path(), &corpus).unwrap_err();
        assert!(err.to_string().contains("`b`"), "{err}");
        let unknown = write_tmp("2 1\na 1\nz 2\n");
        assert!(matches!(
            load_embeddings(unknown.path(), &corpus),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn written_embeddings_round_trip() {
        let corpus = Corpus::new(vec![item("a", "x", None), item("b", "y", None)]).unwrap();
        let x = EmbeddingMatrix::new(
            Array2::from_shape_vec((2, 2), vec![0.1, 1.0 / 3.0, -2e-300, 7.5]).unwrap(),
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_embeddings(f.path(), &corpus, &x).unwrap();
        assert_eq!(load_embeddings(f.path(), &corpus).unwrap(), x);
    }
}
