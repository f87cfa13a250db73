//! Per-class self-confidence thresholds and confident labels.

use serde::Serialize;

use crate::crossval::OOSProbs;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Thresholds {
    /// `t_j`: mean `P̂[i][j]` over samples whose noisy label is `j`.
    pub t: Vec<f64>,
    /// Number of samples averaged for each class.
    pub support: Vec<usize>,
}

/// Confident label per sample, `None` where no class clears its threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfidentLabels {
    pub labels: Vec<Option<usize>>,
}

impl ConfidentLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_confident(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// `t_j = mean_{i : y_i = j} P̂[i][j]`; classes without support get `1/K`.
///
/// Rows that no fold model predicted are skipped.
pub fn class_thresholds(probs: &OOSProbs, noisy: &[usize]) -> Thresholds {
    let k = probs.num_classes();
    let mut sum = vec![0.0; k];
    let mut support = vec![0usize; k];
    for (i, &y) in noisy.iter().enumerate() {
        if probs.is_defined(i) {
            sum[y] += probs.probs[[i, y]];
            support[y] += 1;
        }
    }
    let t = sum
        .iter()
        .zip(&support)
        .map(|(&s, &n)| if n == 0 { 1.0 / k as f64 } else { s / n as f64 })
        .collect();
    Thresholds { t, support }
}

/// Confident label of a single probability row.
pub fn confident_label(row: impl IntoIterator<Item = f64>, th: &Thresholds) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, p) in row.into_iter().enumerate() {
        if p >= th.t[j] && best.is_none_or(|(_, b)| p > b) {
            best = Some((j, p));
        }
    }
    best.map(|(j, _)| j)
}

/// Argmax over the classes whose probability reaches their threshold; ties go
/// to the lowest class index.
pub fn confident_labels(probs: &OOSProbs, th: &Thresholds) -> ConfidentLabels {
    let labels = probs
        .probs
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if probs.is_defined(i) {
                confident_label(r.iter().copied(), th)
            } else {
                None
            }
        })
        .collect();
    ConfidentLabels { labels }
}
