//! Tokenization, class-based TF-IDF term weights and keyword topic search.
//!
//! Documents sharing a topic label are pooled into one class. For a term
//! `t` and class `c`:
//!
//! ```text
//! tf(t, c) = count(t, c) / sum_t' count(t', c)        (square-rooted when reducing frequent words)
//! W(t, c)  = tf(t, c) * ln(1 + A / f_t)
//! ```
//!
//! where `A` is the mean token count per class and `f_t` the total count of
//! `t` over all classes. Outlier documents take no part.

mod search;

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use rayon::prelude::*;
use regex::Regex;
use thiserror::Error;

use crate::stopwords::{is_stopword, STOPWORD_LIST_ID};

pub use search::{search_topics, SearchResult, SearchStatus, TermWeight, TopicCard};

#[derive(Debug, Error, PartialEq)]
pub enum RepresentError {
    #[error("labels cover {labels} documents but there are {docs}")]
    LabelMismatch { labels: usize, docs: usize },
    #[error("no non-outlier topics to represent")]
    NoClasses,
    #[error("topic {0} has no tokens")]
    EmptyClass(usize),
    #[error("unknown topic {0}")]
    UnknownTopic(usize),
    #[error("no searchable terms in query")]
    NoSearchableTerms,
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),
}

static TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[\p{Alphabetic}\p{Nd}]+(?:-[\p{Alphabetic}\p{Nd}]+)*").unwrap());

/// Lowercased tokens before stopword and length filtering.
pub fn raw_tokens(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    TOKEN.find_iter(&lower).map(|m| m.as_str().to_string()).collect()
}

/// Lowercased alphanumeric runs, kept whole across single inner hyphens
/// (`sars-cov-2`), without stopwords or one-character tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = raw_tokens(text);
    tokens.retain(|t| t.chars().nth(1).is_some() && !is_stopword(t));
    tokens
}

/// Term list in lexicographic order with total class counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
    term_frequency: Vec<u64>,
    stopword_list: String,
}

impl Vocabulary {
    /// Terms must be strictly increasing and every frequency at least 1.
    pub fn new(terms: Vec<String>, term_frequency: Vec<u64>) -> Result<Self, RepresentError> {
        if terms.len() != term_frequency.len() {
            return Err(RepresentError::InvalidVocabulary(format!(
                "{} terms but {} frequencies",
                terms.len(),
                term_frequency.len()
            )));
        }
        if let Some(w) = terms.windows(2).find(|w| w[0] >= w[1]) {
            return Err(RepresentError::InvalidVocabulary(format!(
                "terms out of order at `{}`",
                w[1]
            )));
        }
        if let Some(i) = term_frequency.iter().position(|&f| f == 0) {
            return Err(RepresentError::InvalidVocabulary(format!(
                "term `{}` has zero frequency",
                terms[i]
            )));
        }
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Ok(Self { terms, index, term_frequency, stopword_list: STOPWORD_LIST_ID.into() })
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

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn get(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term_frequencies(&self) -> &[u64] {
        &self.term_frequency
    }

    pub fn stopword_list(&self) -> &str {
        &self.stopword_list
    }
}

/// Per-class term counts, one sparse row per topic, entries sorted by term
/// index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassCounts {
    pub rows: Vec<Vec<(u32, u64)>>,
}

impl ClassCounts {
    pub fn n_classes(&self) -> usize {
        self.rows.len()
    }

    pub fn count(&self, class: usize, term: u32) -> u64 {
        let row = &self.rows[class];
        row.binary_search_by_key(&term, |e| e.0).map_or(0, |i| row[i].1)
    }

    pub fn class_total(&self, class: usize) -> u64 {
        self.rows[class].iter().map(|e| e.1).sum()
    }
}

/// Pools the tokens of each non-outlier topic. Topic `c` is class `c`;
/// topics are `0..=max(label)`.
pub fn build_class_counts<S: AsRef<str> + Sync>(
    docs: &[S],
    labels: &[i32],
) -> Result<(Vocabulary, ClassCounts), RepresentError> {
    if docs.len() != labels.len() {
        return Err(RepresentError::LabelMismatch { labels: labels.len(), docs: docs.len() });
    }
    let k = labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize);
    if k == 0 {
        return Err(RepresentError::NoClasses);
    }
    let per_class: Vec<BTreeMap<String, u64>> = (0..k)
        .into_par_iter()
        .map(|c| {
            let mut counts = BTreeMap::new();
            for (doc, &l) in docs.iter().zip(labels) {
                if l == c as i32 {
                    for t in tokenize(doc.as_ref()) {
                        *counts.entry(t).or_insert(0) += 1;
                    }
                }
            }
            counts
        })
        .collect();
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for counts in &per_class {
        for (t, &n) in counts {
            *totals.entry(t.as_str()).or_insert(0) += n;
        }
    }
    let terms: Vec<String> = totals.keys().map(|t| t.to_string()).collect();
    let freqs: Vec<u64> = totals.values().copied().collect();
    let vocab = Vocabulary::new(terms, freqs)?;
    let rows = per_class
        .iter()
        .map(|counts| counts.iter().map(|(t, &n)| (vocab.get(t).unwrap(), n)).collect())
        .collect();
    Ok((vocab, ClassCounts { rows }))
}

/// Compressed sparse rows: one row per topic, columns are vocabulary
/// indices in increasing order, only positive weights stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseWeights {
    n_cols: usize,
    indptr: Vec<u32>,
    indices: Vec<u32>,
    values: Vec<f64>,
    norms: Vec<f64>,
}

impl SparseWeights {
    pub fn new(n_cols: usize, indptr: Vec<u32>, indices: Vec<u32>, values: Vec<f64>) -> Result<Self, RepresentError> {
        let bad = |m: String| Err(RepresentError::InvalidWeights(m));
        if indptr.first() != Some(&0) {
            return bad("row offsets must start at 0".into());
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("row offsets must be non-decreasing".into());
        }
        let nnz = *indptr.last().unwrap() as usize;
        if nnz != indices.len() || nnz != values.len() {
            return bad(format!("{nnz} entries declared, {} indices, {} values", indices.len(), values.len()));
        }
        for r in 0..indptr.len() - 1 {
            let cols = &indices[indptr[r] as usize..indptr[r + 1] as usize];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c as usize >= n_cols) {
                return bad(format!("row {r} has unsorted or out-of-range columns"));
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return bad("weights must be finite and positive".into());
        }
        let norms = (0..indptr.len() - 1)
            .map(|r| values[indptr[r] as usize..indptr[r + 1] as usize].iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        Ok(Self { n_cols, indptr, indices, values, norms })
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[r] as usize, self.indptr[r + 1] as usize);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, r: usize, col: u32) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&col).map_or(0.0, |i| vals[i])
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.norms[r]
    }

    pub fn indptr(&self) -> &[u32] {
        &self.indptr
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same matrix with every weight rounded through `f32`, the precision
    /// stored on disk.
    pub fn rounded_to_f32(&self) -> Self {
        let values: Vec<f64> = self.values.iter().map(|&v| v as f32 as f64).collect();
        Self::new(self.n_cols, self.indptr.clone(), self.indices.clone(), values)
            .expect("rounding keeps weights positive")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassTfIdfModel {
    /// Mean token count per class.
    pub avg_tokens: f64,
    pub reduce_frequent_words: bool,
    pub weights: SparseWeights,
}

pub fn class_tfidf(
    vocab: &Vocabulary,
    counts: &ClassCounts,
    reduce_frequent_words: bool,
) -> Result<ClassTfIdfModel, RepresentError> {
    if counts.n_classes() == 0 {
        return Err(RepresentError::NoClasses);
    }
    let totals: Vec<u64> = (0..counts.n_classes()).map(|c| counts.class_total(c)).collect();
    if let Some(c) = totals.iter().position(|&t| t == 0) {
        return Err(RepresentError::EmptyClass(c));
    }
    let avg = totals.iter().map(|&t| t as f64).sum::<f64>() / totals.len() as f64;
    let idf: Vec<f64> = vocab.term_frequencies().iter().map(|&f| (1.0 + avg / f as f64).ln()).collect();
    let mut indptr = vec![0u32];
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for (row, &total) in counts.rows.iter().zip(&totals) {
        for &(t, n) in row {
            let mut tf = n as f64 / total as f64;
            if reduce_frequent_words {
                tf = tf.sqrt();
            }
            indices.push(t);
            values.push(tf * idf[t as usize]);
        }
        indptr.push(indices.len() as u32);
    }
    Ok(ClassTfIdfModel {
        avg_tokens: avg,
        reduce_frequent_words,
        weights: SparseWeights::new(vocab.len(), indptr, indices, values)?,
    })
}

/// The `n` highest-weight terms of a topic; equal weights in lexicographic
/// term order.
pub fn top_terms(
    weights: &SparseWeights,
    vocab: &Vocabulary,
    topic: usize,
    n: usize,
) -> Result<Vec<TermWeight>, RepresentError> {
    if topic >= weights.n_rows() {
        return Err(RepresentError::UnknownTopic(topic));
    }
    let (cols, vals) = weights.row(topic);
    let mut order: Vec<usize> = (0..cols.len()).collect();
    // Column order is lexicographic term order, so the stable sort keeps ties right.
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    Ok(order
        .into_iter()
        .take(n)
        .map(|i| TermWeight { term: vocab.term(cols[i] as usize).to_string(), weight: vals[i] })
        .collect())
}
