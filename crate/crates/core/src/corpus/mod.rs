//! Weakly labeled datasets.
//!
//! A [`WeakDataset`] holds the documents, the binary LF match matrix `Z`
//! (stored sparsely as one [`Signature`] per sample) and the LF-to-class
//! mapping `T`. Noisy labels are obtained from `Z · T` by [`majority_vote`].

mod io;

pub use io::{
    load_dataset, read_docs, read_gold, read_t_matrix, write_dataset, write_labels, write_t_matrix,
    DatasetPaths,
};

use ndarray::{Array2, ArrayView2};
use rand::Rng as _;
use serde::Serialize;

use crate::seed;
use crate::{Error, Result};

/// The sorted set of LFs matching one sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Signature(Vec<usize>);

impl Signature {
    /// Builds a signature from arbitrary LF indices; duplicates are merged.
    pub fn new(mut lfs: Vec<usize>) -> Self {
        lfs.sort_unstable();
        lfs.dedup();
        Signature(lfs)
    }

    pub fn lfs(&self) -> &[usize] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, lf: usize) -> bool {
        self.0.binary_search(&lf).is_ok()
    }
}

/// Documents, LF matches, LF-to-class mapping and optional gold labels.
///
/// Immutable once built; share it freely between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakDataset {
    ids: Vec<String>,
    texts: Vec<String>,
    signatures: Vec<Signature>,
    num_lfs: usize,
    t: Array2<f64>,
    gold: Option<Vec<usize>>,
}

impl WeakDataset {
    /// Validates and assembles a dataset.
    ///
    /// `t` must be `num_lfs × K` with `K ≥ 2`, nonnegative entries and rows
    /// summing to one.
    pub fn new(
        ids: Vec<String>,
        texts: Vec<String>,
        signatures: Vec<Signature>,
        num_lfs: usize,
        t: Array2<f64>,
        gold: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = texts.len();
        if ids.len() != n || signatures.len() != n {
            return Err(Error::Dataset(format!(
                "{} ids, {} texts and {} signatures",
                ids.len(),
                n,
                signatures.len()
            )));
        }
        if t.nrows() != num_lfs {
            return Err(Error::Dataset(format!(
                "T has {} rows but there are {num_lfs} LFs",
                t.nrows()
            )));
        }
        let k = t.ncols();
        if k < 2 {
            return Err(Error::Dataset(format!("need at least 2 classes, got {k}")));
        }
        for (l, row) in t.rows().into_iter().enumerate() {
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Dataset(format!(
                    "T row {l} has a negative or non-finite entry"
                )));
            }
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::Dataset(format!("T row {l} does not sum to 1")));
            }
        }
        for (i, sig) in signatures.iter().enumerate() {
            if let Some(&lf) = sig.lfs().last() {
                if lf >= num_lfs {
                    return Err(Error::Dataset(format!(
                        "sample {i}: LF index {lf} out of range (L={num_lfs})"
                    )));
                }
            }
        }
        if let Some(g) = &gold {
            if g.len() != n {
                return Err(Error::Dataset(format!(
                    "{} gold labels for {n} samples",
                    g.len()
                )));
            }
            if let Some(bad) = g.iter().position(|&y| y >= k) {
                return Err(Error::Dataset(format!(
                    "gold label {} of sample {bad} out of range (K={k})",
                    g[bad]
                )));
            }
        }
        Ok(WeakDataset {
            ids,
            texts,
            signatures,
            num_lfs,
            t,
            gold,
        })
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }

    pub fn num_lfs(&self) -> usize {
        self.num_lfs
    }

    pub fn num_classes(&self) -> usize {
        self.t.ncols()
    }

    /// External ids; position `i` is the dense id of the sample.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn texts(&self) -> &[String] {
        &self.texts
    }

    pub fn text(&self, i: usize) -> &str {
        &self.texts[i]
    }

    pub fn signatures(&self) -> &[Signature] {
        &self.signatures
    }

    pub fn signature(&self, i: usize) -> &Signature {
        &self.signatures[i]
    }

    pub fn is_matched(&self, i: usize) -> bool {
        !self.signatures[i].is_empty()
    }

    /// The initial LF-to-class matrix.
    pub fn t(&self) -> ArrayView2<'_, f64> {
        self.t.view()
    }

    pub fn gold(&self) -> Option<&[usize]> {
        self.gold.as_deref()
    }

    /// `Z[i][l]`.
    pub fn z(&self, i: usize, lf: usize) -> bool {
        self.signatures[i].contains(lf)
    }

    /// Per-LF match counts, `Σ_i Z[i][l]`.
    pub fn lf_match_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_lfs];
        for sig in &self.signatures {
            for &lf in sig.lfs() {
                counts[lf] += 1;
            }
        }
        counts
    }

    /// Indices of samples matched by at least one LF.
    pub fn matched(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_matched(i)).collect()
    }

    /// Indices of samples with an empty signature.
    pub fn unmatched(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_matched(i)).collect()
    }

    /// Mask of samples with an empty signature.
    pub fn unmatched_mask(&self) -> Vec<bool> {
        self.signatures.iter().map(Signature::is_empty).collect()
    }

    /// Same samples, different mapping matrix.
    pub fn with_t(&self, t: Array2<f64>) -> Result<Self> {
        WeakDataset::new(
            self.ids.clone(),
            self.texts.clone(),
            self.signatures.clone(),
            self.num_lfs,
            t,
            self.gold.clone(),
        )
    }

    /// Gold labels as a [`LabelVector`], if present.
    pub fn gold_labels(&self) -> Option<LabelVector> {
        self.gold.as_ref().map(|g| LabelVector {
            labels: g.clone(),
            was_unmatched: self.unmatched_mask(),
        })
    }
}

/// One class id per sample plus the mask of samples no LF matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelVector {
    pub labels: Vec<usize>,
    pub was_unmatched: Vec<bool>,
}

impl LabelVector {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Fraction of positions where `self` and `other` differ.
    pub fn change_fraction(&self, other: &LabelVector) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        let changed = self
            .labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count();
        changed as f64 / self.labels.len() as f64
    }
}

impl std::ops::Deref for LabelVector {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.labels
    }
}

/// Coverage, LF hit rate and (with gold labels) majority-vote accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub num_samples: usize,
    pub num_lfs: usize,
    pub num_classes: usize,
    pub coverage: f64,
    pub avg_lf_hits: f64,
    pub majority_accuracy: Option<MeanStd>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Class scores `row_i(Z) · t` for one sample, summed in ascending LF order.
pub fn class_scores(sig: &Signature, t: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut scores = vec![0.0; t.ncols()];
    for &lf in sig.lfs() {
        for (s, v) in scores.iter_mut().zip(t.row(lf)) {
            *s += v;
        }
    }
    scores
}

/// Majority vote over `Z · t_matrix`.
///
/// Ties among the maximal classes are broken uniformly at random with a stream
/// keyed by `(seed, sample id)`; samples no LF matches get a uniformly random
/// class and are flagged in `was_unmatched`.
pub fn majority_vote(ds: &WeakDataset, t_matrix: ArrayView2<'_, f64>, seed: u64) -> LabelVector {
    assert_eq!(t_matrix.nrows(), ds.num_lfs(), "T row count must equal L");
    let k = t_matrix.ncols();
    let mut labels = Vec::with_capacity(ds.len());
    let mut was_unmatched = Vec::with_capacity(ds.len());
    for (i, sig) in ds.signatures().iter().enumerate() {
        let mut rng = seed::stream(seed, "tie", i as u64);
        if sig.is_empty() {
            labels.push(rng.random_range(0..k));
            was_unmatched.push(true);
            continue;
        }
        let scores = class_scores(sig, t_matrix);
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tied: Vec<usize> = (0..k).filter(|&j| scores[j] == best).collect();
        let label = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.random_range(0..tied.len())]
        };
        labels.push(label);
        was_unmatched.push(false);
    }
    LabelVector {
        labels,
        was_unmatched,
    }
}

/// Coverage and LF hit statistics; with gold labels, also the accuracy of
/// [`majority_vote`] under `repeats` different tie-break seeds.
pub fn dataset_stats(ds: &WeakDataset, repeats: usize, seed: u64) -> DatasetStats {
    let n = ds.len().max(1) as f64;
    let covered = ds.signatures().iter().filter(|s| !s.is_empty()).count();
    let hits: usize = ds.signatures().iter().map(Signature::len).sum();
    let majority_accuracy = ds.gold().filter(|_| repeats > 0).map(|gold| {
        let accs: Vec<f64> = (0..repeats)
            .map(|r| {
                let mv = majority_vote(ds, ds.t(), seed::derive(seed, "stats", r as u64));
                let correct = mv.iter().zip(gold).filter(|(a, b)| a == b).count();
                correct as f64 / n
            })
            .collect();
        mean_std(&accs)
    });
    DatasetStats {
        num_samples: ds.len(),
        num_lfs: ds.num_lfs(),
        num_classes: ds.num_classes(),
        coverage: covered as f64 / n,
        avg_lf_hits: hits as f64 / n,
        majority_accuracy,
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

/// One-hot `L × K` matrix from per-LF class assignments.
pub fn one_hot_t(assignment: &[usize], num_classes: usize) -> Array2<f64> {
    let mut t = Array2::zeros((assignment.len(), num_classes));
    for (l, &c) in assignment.iter().enumerate() {
        t[[l, c]] = 1.0;
    }
    t
}
