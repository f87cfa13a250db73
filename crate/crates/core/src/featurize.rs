//! TF-IDF featurization.
//!
//! Tokens are maximal runs of Unicode alphanumeric characters, lowercased.
//! Weights are raw term counts times a smoothed idf,
//! `ln((1 + n_docs) / (1 + df)) + 1`, and every row is L2-normalized.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizeConfig {
    pub min_df: usize,
    pub max_features: Option<usize>,
}

impl Default for FeaturizeConfig {
    fn default() -> Self {
        FeaturizeConfig {
            min_df: 1,
            max_features: None,
        }
    }
}

/// Splits `text` into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Term index, document frequencies and the number of fitted documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    num_docs_fitted: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<usize>, num_docs_fitted: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            df,
            num_docs_fitted,
            index,
        }
    }

    /// Rebuilds the lookup table after deserialization.
    pub(crate) fn reindex(self) -> Self {
        Vocabulary::from_parts(self.terms, self.df, self.num_docs_fitted)
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

    pub fn df(&self, index: usize) -> usize {
        self.df[index]
    }

    pub fn num_docs_fitted(&self) -> usize {
        self.num_docs_fitted
    }

    pub fn idf(&self, index: usize) -> f64 {
        ((1.0 + self.num_docs_fitted as f64) / (1.0 + self.df[index] as f64)).ln() + 1.0
    }
}

/// Builds the vocabulary of `texts`.
///
/// Terms with `df < min_df` are dropped. With `max_features`, the terms with
/// the highest df are kept, ties going to the lexicographically smaller term.
/// Term indices follow lexicographic order.
pub fn fit_vocabulary<S: AsRef<str>>(texts: &[S], cfg: &FeaturizeConfig) -> Result<Vocabulary> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for text in texts {
        let mut seen: Vec<String> = tokenize(text.as_ref()).collect();
        seen.sort_unstable();
        seen.dedup();
        for term in seen {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = df.into_iter().filter(|(_, d)| *d >= cfg.min_df).collect();
    if let Some(max) = cfg.max_features {
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        kept.truncate(max);
    }
    if kept.is_empty() {
        return Err(Error::EmptyVocabulary { min_df: cfg.min_df });
    }
    kept.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let (terms, df) = kept.into_iter().unzip();
    Ok(Vocabulary::from_parts(terms, df, texts.len()))
}

/// Compressed sparse rows of nonnegative reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatrix {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    ncols: usize,
}

impl SparseMatrix {
    pub fn new(ncols: usize) -> Self {
        SparseMatrix {
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            ncols,
        }
    }

    /// Appends a row; `entries` must have strictly increasing column indices.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (c, v) in entries {
            debug_assert!(c < self.ncols);
            self.indices.push(c);
            self.values.push(v);
        }
        self.indptr.push(self.indices.len());
    }

    /// Dense rows, zeros omitted.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut m = SparseMatrix::new(ncols);
        for r in rows {
            m.push_row(r.iter().copied().enumerate().filter(|(_, v)| *v != 0.0));
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_norm(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nrows())
            .map(|i| {
                let mut r = vec![0.0; self.ncols];
                for (c, v) in self.row(i) {
                    r[c] = v;
                }
                r
            })
            .collect()
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> SparseMatrix {
        let mut m = SparseMatrix::new(self.ncols);
        for &i in idx {
            m.push_row(self.row(i));
        }
        m
    }
}

/// Raw (unnormalized) TF-IDF weights of one document, sorted by column.
fn raw_weights(text: &str, vocab: &Vocabulary) -> Vec<(usize, f64)> {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for tok in tokenize(text) {
        if let Some(i) = vocab.index_of(&tok) {
            *counts.entry(i).or_insert(0) += 1;
        }
    }
    let mut row: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(i, tf)| (i, tf as f64 * vocab.idf(i)))
        .collect();
    row.sort_unstable_by_key(|e| e.0);
    row
}

/// TF-IDF rows of `texts` under `vocab`, each L2-normalized (or all zero).
pub fn transform<S: AsRef<str>>(texts: &[S], vocab: &Vocabulary) -> SparseMatrix {
    let mut m = SparseMatrix::new(vocab.len());
    for text in texts {
        let row = raw_weights(text.as_ref(), vocab);
        let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
        m.push_row(row.into_iter().map(|(i, v)| (i, v / norm)));
    }
    m
}
