//! Dataset acquisition: numeric CSV, text corpora with count vectorization,
//! synthetic sparse data and word-level augmentation.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::numerics::{dot, DenseMatrix};

/// Vocabulary size used for review-style corpora.
pub const DEFAULT_VOCAB_CAP: usize = 1600;

/// Label noise scale of [`gen_synthetic_sparse`].
pub const SYNTHETIC_NOISE: f64 = 0.1;

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            parse_err(path, line, format!("ragged row: expected {expected_len} fields, found {len}"))
        }
        _ => parse_err(path, line, e.to_string()),
    }
}

/// Optional header names and the parsed rows.
type NumericTable = (Option<Vec<String>>, Vec<Vec<f64>>);

/// Reads a numeric table; every row must have the same number of fields.
fn read_numeric_table(path: &Path, has_header: bool) -> Result<NumericTable> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = if has_header {
        Some(
            rdr.headers()
                .map_err(|e| csv_err(path, e))?
                .iter()
                .map(str::to_owned)
                .collect(),
        )
    } else {
        None
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .enumerate()
            .map(|(col, field)| {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("column {}: '{field}' is not a number", col + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(path, line, format!("column {}: non-finite value '{field}'", col + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// Loads a comma-separated numeric file whose last column is the label.
pub fn load_numeric_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let (header, rows) = read_numeric_table(path, has_header)?;
    if rows.is_empty() {
        return Err(Error::Empty("CSV file has no data rows"));
    }
    let width = rows[0].len();
    if width < 2 {
        return Err(parse_err(path, 1, "need at least one feature column and a label column"));
    }
    let y = rows.iter().map(|r| r[width - 1]).collect();
    let features: Vec<&[f64]> = rows.iter().map(|r| &r[..width - 1]).collect();
    let data = Dataset::new(DenseMatrix::from_rows(&features)?, y)?;
    match header {
        Some(mut names) => {
            names.pop();
            data.with_feature_names(names)
        }
        None => Ok(data),
    }
}

/// Loads a numeric table with no label column, e.g. precomputed features.
pub fn load_feature_table(path: impl AsRef<Path>, has_header: bool) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let (_, rows) = read_numeric_table(path, has_header)?;
    if rows.is_empty() {
        return Err(Error::Empty("feature table has no rows"));
    }
    DenseMatrix::from_rows(&rows)
}

/// Writes `data` in the numeric CSV format (features then label, no header).
pub fn write_numeric_csv(data: &Dataset, mut out: impl Write) -> Result<()> {
    let mut line = String::new();
    for (row, y) in data.x().row_iter().zip(data.y()) {
        line.clear();
        for v in row {
            line.push_str(&format_float(*v));
            line.push(',');
        }
        line.push_str(&format_float(*y));
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Shortest representation that parses back to the same value.
fn format_float(v: f64) -> String {
    if v == 0.0 {
        "0".to_owned()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::Empty("corpus has no documents"));
        }
        Ok(Self { documents })
    }

    pub fn from_pairs<L: Into<String>, T: Into<String>>(pairs: impl IntoIterator<Item = (L, T)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(l, t)| Document {
                    label: l.into(),
                    text: t.into(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }
}

/// Reads a two-column `label,text` CSV with RFC 4180 quoting.
pub fn load_corpus_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut buf = String::new();
    File::open(path)?.read_to_string(&mut buf)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_reader(buf.as_bytes());
    let mut docs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        if rec.len() != 2 {
            let line = rec.position().map_or(0, |p| p.line());
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        docs.push(Document {
            label: rec[0].trim().to_owned(),
            text: rec[1].to_owned(),
        });
    }
    Corpus::new(docs)
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Keeps the `cap` most frequent tokens; ties break lexicographically.
    pub fn fit(corpus: &Corpus, cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::invalid("vocabulary cap must be >= 1"));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in &corpus.documents {
            for tok in tokenize(&doc.text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(cap);
        let terms: Vec<String> = ranked.into_iter().map(|(t, _)| t).collect();
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self { terms, index })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// Count vector of `text`; out-of-vocabulary tokens are ignored.
    pub fn transform(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for tok in tokenize(text) {
            if let Some(i) = self.get(&tok) {
                v[i] += 1.0;
            }
        }
        v
    }
}

/// How raw corpus labels become real-valued targets.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelEncoding {
    /// Parse the label as a number.
    Numeric,
    /// Integer scores in `[min, max]`; `>= threshold` is +1, the rest −1.
    Binarize { min: i64, max: i64, threshold: i64 },
    /// +1 for the named category, −1 otherwise.
    OneVsRest(String),
}

impl Default for LabelEncoding {
    fn default() -> Self {
        LabelEncoding::Binarize {
            min: 1,
            max: 5,
            threshold: 4,
        }
    }
}

/// Maps review scores to ±1: scores of at least 4 are favorable.
pub fn binarize_labels(scores: &[i64]) -> Result<Vec<f64>> {
    binarize_labels_in(scores, 1, 5, 4)
}

pub fn binarize_labels_in(scores: &[i64], min: i64, max: i64, threshold: i64) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|&s| {
            if s < min || s > max {
                Err(Error::invalid(format!("score {s} outside [{min}, {max}]")))
            } else if s >= threshold {
                Ok(1.0)
            } else {
                Ok(-1.0)
            }
        })
        .collect()
}

fn encode_labels(corpus: &Corpus, enc: &LabelEncoding) -> Result<Vec<f64>> {
    match enc {
        LabelEncoding::Numeric => corpus
            .documents
            .iter()
            .map(|d| {
                d.label
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::invalid(format!("label '{}' is not a number", d.label)))
            })
            .collect(),
        LabelEncoding::Binarize { min, max, threshold } => {
            let scores = corpus
                .documents
                .iter()
                .map(|d| {
                    d.label
                        .parse::<i64>()
                        .map_err(|_| Error::invalid(format!("label '{}' is not an integer score", d.label)))
                })
                .collect::<Result<Vec<i64>>>()?;
            binarize_labels_in(&scores, *min, *max, *threshold)
        }
        LabelEncoding::OneVsRest(cat) => Ok(corpus
            .documents
            .iter()
            .map(|d| if &d.label == cat { 1.0 } else { -1.0 })
            .collect()),
    }
}

/// Builds the vocabulary and the count-vector dataset for `corpus`.
pub fn build_bow(corpus: &Corpus, vocab_cap: usize, labels: &LabelEncoding) -> Result<(Vocabulary, Dataset)> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus has no documents"));
    }
    let vocab = Vocabulary::fit(corpus, vocab_cap)?;
    if vocab.is_empty() {
        return Err(Error::Empty("corpus contains no tokens"));
    }
    let rows: Vec<Vec<f64>> = corpus.documents.iter().map(|d| vocab.transform(&d.text)).collect();
    let y = encode_labels(corpus, labels)?;
    let data = Dataset::new(DenseMatrix::from_rows(&rows)?, y)?.with_feature_names(vocab.terms.clone())?;
    Ok((vocab, data))
}

/// Sparse Gaussian design with labels from a random linear model.
///
/// Each entry is nonzero with probability `p` and then standard normal.
/// Labels are `Xθ* + ε` with `θ*` standard normal and `ε` of scale 0.1.
pub fn gen_synthetic_sparse(n: usize, d: usize, p: f64, seed: u64) -> Result<Dataset> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("sparsity p must lie in (0, 1], got {p}")));
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let keep = rng.gen::<f64>() < p;
        x.push(if keep { rng.sample(StandardNormal) } else { 0.0 });
    }
    let x = DenseMatrix::from_row_major(n, d, x)?;
    let theta_star: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let y = x
        .row_iter()
        .map(|row| dot(row, &theta_star) + SYNTHETIC_NOISE * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::new(x, y)
}

/// Replaces each label by its sign (+1 for positive values, −1 otherwise).
pub fn sign_labels(data: &Dataset) -> Result<Dataset> {
    let y = data.y().iter().map(|&v| if v > 0.0 { 1.0 } else { -1.0 }).collect();
    Dataset::new(data.x().clone(), y)
}

/// Word dropout with optional shuffling on whitespace-delimited words.
///
/// A document left with all its words in the original order is returned
/// verbatim; otherwise surviving words are joined by single spaces.
pub fn augment_dropout(corpus: &Corpus, drop_prob: f64, shuffle: bool, seed: u64) -> Result<Corpus> {
    if !(0.0..1.0).contains(&drop_prob) {
        return Err(Error::invalid(format!("drop probability must lie in [0, 1), got {drop_prob}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let documents = corpus
        .documents
        .iter()
        .map(|doc| {
            let words: Vec<&str> = doc.text.split_whitespace().collect();
            let mut kept: Vec<&str> = words
                .iter()
                .copied()
                .filter(|_| drop_prob == 0.0 || rng.gen::<f64>() >= drop_prob)
                .collect();
            if shuffle {
                kept.shuffle(&mut rng);
            }
            let text = if kept == words {
                doc.text.clone()
            } else {
                kept.join(" ")
            };
            Document {
                label: doc.label.clone(),
                text,
            }
        })
        .collect();
    Ok(Corpus { documents })
}
