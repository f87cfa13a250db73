//! Evaluation metrics and the per-run report.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    /// F1 of class 1; two classes only.
    BinaryF1,
    MacroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::BinaryF1 => "binary_f1",
            Metric::MacroF1 => "macro_f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "binary_f1" | "f1" => Ok(Metric::BinaryF1),
            "macro_f1" => Ok(Metric::MacroF1),
            _ => Err(Error::Config(format!(
                "unknown metric `{s}` (accuracy, binary_f1, macro_f1)"
            ))),
        }
    }
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Scores `pred` against `gold`.
///
/// Macro F1 averages over the classes that occur in either vector. F1 is 0
/// when a class has no true positives.
pub fn evaluate(pred: &[usize], gold: &[usize], metric: Metric, num_classes: usize) -> Result<f64> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    if let Some(&bad) = pred.iter().chain(gold).find(|&&y| y >= num_classes) {
        return Err(Error::Shape(format!(
            "label {bad} out of range for {num_classes} classes"
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("no labels to evaluate".into()));
    }
    let mut confusion = vec![vec![0usize; num_classes]; num_classes];
    for (&p, &g) in pred.iter().zip(gold) {
        confusion[g][p] += 1;
    }
    let class_f1 = |c: usize| {
        let tp = confusion[c][c];
        let fp: usize = (0..num_classes).map(|g| confusion[g][c]).sum::<usize>() - tp;
        let fn_: usize = confusion[c].iter().sum::<usize>() - tp;
        (f1(tp, fp, fn_), tp + fp + fn_ > 0)
    };
    match metric {
        Metric::Accuracy => {
            let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
            Ok(hits as f64 / pred.len() as f64)
        }
        Metric::BinaryF1 => {
            if num_classes != 2 {
                return Err(Error::Metric {
                    metric: "binary_f1",
                    num_classes,
                });
            }
            Ok(class_f1(1).0)
        }
        Metric::MacroF1 => {
            let present: Vec<f64> = (0..num_classes)
                .map(class_f1)
                .filter(|(_, seen)| *seen)
                .map(|(f, _)| f)
                .collect();
            Ok(present.iter().sum::<f64>() / present.len() as f64)
        }
    }
}

/// Mean and standard error of the mean over repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation over √n; 0 for a single value.
    pub sem: f64,
    pub values: Vec<f64>,
}

pub fn summarize(values: Vec<f64>) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sem = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Some(Summary { mean, sem, values })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub repeat: usize,
    pub error: String,
}

/// Results of one `run`. Wall-clock times are kept out of this report so that
/// repeated runs serialize identically; they go to `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub method: String,
    pub strategy: String,
    pub metric: Metric,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    /// Classifier score on the test split.
    pub test: Option<Summary>,
    /// Classifier score on the dev split.
    pub dev: Option<Summary>,
    /// Accuracy of the produced training labels against training gold.
    pub label_accuracy: Option<Summary>,
    /// Accuracy of plain majority vote against training gold, same seeds.
    pub majority_label_accuracy: Option<Summary>,
    /// Repeat whose artifacts were written.
    pub selected_repeat: Option<usize>,
    /// False when no dev split was available and the last repeat was kept.
    pub selected_by_dev: bool,
    pub partial: bool,
    pub failures: Vec<Failure>,
}
