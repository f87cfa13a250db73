//! Weighted multinomial logistic regression trained with mini-batch SGD.
//!
//! The objective is
//!
//! ```text
//! J(W, b) = -Σ_i w_i ln softmax(x_i W + b)[y_i] / Σ_i w_i  +  l2 ‖W‖²
//! ```
//!
//! Parameters start at zero. Each epoch visits the samples in an order drawn
//! from a stream keyed by `(seed, epoch)`. After every epoch the objective is
//! evaluated on the validation set (or the training set when there is none)
//! and training stops once it has not improved for `patience` epochs; the
//! parameters of the best epoch are returned.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::featurize::SparseMatrix;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            learning_rate: 1e-1,
            epochs: 20,
            patience: 5,
            batch_size: 32,
            l2: 0.0,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.patience == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs, patience and batch_size must be at least 1".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!(
                "l2 must be nonnegative, got {}",
                self.l2
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Trained parameters: `weights` is `V × K`, `bias` has length `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub weights: Array2<f64>,
    pub bias: Vec<f64>,
    pub training_log: Vec<f64>,
}

impl Model {
    pub fn zeros(num_features: usize, num_classes: usize) -> Self {
        Model {
            weights: Array2::zeros((num_features, num_classes)),
            bias: vec![0.0; num_classes],
            training_log: Vec::new(),
        }
    }

    pub fn num_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.weights.ncols()
    }

    /// Softmax class probabilities, one row per input row.
    pub fn predict_proba(&self, x: &SparseMatrix) -> Array2<f64> {
        predict_proba(self, x)
    }

    /// Serializes to the versioned JSON model format.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            num_features: self.num_features(),
            num_classes: self.num_classes(),
            weights: self.weights.iter().copied().collect(),
            bias: self.bias.clone(),
            training_log: self.training_log.clone(),
        };
        serde_json::to_string(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model {} v{}",
                file.format, file.version
            )));
        }
        let weights = Array2::from_shape_vec((file.num_features, file.num_classes), file.weights)
            .map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.bias.len() != file.num_classes {
            return Err(Error::ModelFormat(
                "bias length differs from class count".into(),
            ));
        }
        Ok(Model {
            weights,
            bias: file.bias,
            training_log: file.training_log,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&s)
    }
}

const MODEL_FORMAT: &str = "ulf-logistic-regression";
const MODEL_VERSION: u32 = 1;

/// On-disk model layout. `weights` is row-major `num_features × num_classes`.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    num_features: usize,
    num_classes: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    training_log: Vec<f64>,
}

fn logits(weights: ArrayView2<'_, f64>, bias: &[f64], x: &SparseMatrix, i: usize, out: &mut [f64]) {
    out.copy_from_slice(bias);
    for (c, v) in x.row(i) {
        for (o, w) in out.iter_mut().zip(weights.row(c)) {
            *o += v * w;
        }
    }
}

/// In-place softmax; returns `logsumexp` of the input.
fn softmax(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

/// Row-wise softmax of `x W + b`.
pub fn predict_proba(m: &Model, x: &SparseMatrix) -> Array2<f64> {
    assert_eq!(
        x.ncols(),
        m.num_features(),
        "feature width must match the model"
    );
    let k = m.num_classes();
    let mut out = Array2::zeros((x.nrows(), k));
    let mut z = vec![0.0; k];
    for i in 0..x.nrows() {
        logits(m.weights.view(), &m.bias, x, i, &mut z);
        softmax(&mut z);
        out.row_mut(i).iter_mut().zip(&z).for_each(|(o, p)| *o = *p);
    }
    out
}

/// Adds `scale · Σ_{i∈idx} w_i ∇ℓ_i` to the gradients and returns
/// `scale · Σ_{i∈idx} w_i ℓ_i` (data term only).
#[allow(clippy::too_many_arguments)]
fn accumulate(
    weights: ArrayView2<'_, f64>,
    bias: &[f64],
    x: &SparseMatrix,
    labels: &[usize],
    sample_weights: &[f64],
    idx: &[usize],
    scale: f64,
    grad_w: &mut Array2<f64>,
    grad_b: &mut [f64],
    touched: &mut Vec<usize>,
) -> f64 {
    let k = bias.len();
    let mut z = vec![0.0; k];
    let mut loss = 0.0;
    for &i in idx {
        let w = sample_weights[i];
        if w == 0.0 {
            continue;
        }
        logits(weights, bias, x, i, &mut z);
        let y = labels[i];
        let zy = z[y];
        let lse = softmax(&mut z);
        loss += scale * w * (lse - zy);
        z[y] -= 1.0;
        let coef = scale * w;
        for (gb, d) in grad_b.iter_mut().zip(&z) {
            *gb += coef * d;
        }
        for (c, v) in x.row(i) {
            touched.push(c);
            for (g, d) in grad_w.row_mut(c).iter_mut().zip(&z) {
                *g += coef * v * d;
            }
        }
    }
    loss
}

/// Value and gradient of the full weighted objective.
#[derive(Debug, Clone)]
pub struct Objective {
    pub loss: f64,
    pub grad_weights: Array2<f64>,
    pub grad_bias: Vec<f64>,
}

/// Evaluates the objective and its analytic gradient at `(weights, bias)`.
pub fn objective(
    weights: ArrayView2<'_, f64>,
    bias: &[f64],
    x: &SparseMatrix,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
    l2: f64,
) -> Objective {
    let n = x.nrows();
    let ones;
    let sw = match sample_weights {
        Some(w) => w,
        None => {
            ones = vec![1.0; n];
            &ones
        }
    };
    let total: f64 = sw.iter().sum();
    let mut grad_w = Array2::zeros(weights.raw_dim());
    let mut grad_b = vec![0.0; bias.len()];
    let idx: Vec<usize> = (0..n).collect();
    let mut touched = Vec::new();
    let mut loss = accumulate(
        weights,
        bias,
        x,
        labels,
        sw,
        &idx,
        1.0 / total,
        &mut grad_w,
        &mut grad_b,
        &mut touched,
    );
    if l2 > 0.0 {
        loss += l2 * weights.iter().map(|w| w * w).sum::<f64>();
        grad_w.scaled_add(2.0 * l2, &weights);
    }
    Objective {
        loss,
        grad_weights: grad_w,
        grad_bias: grad_b,
    }
}

fn check_inputs(
    x: &SparseMatrix,
    labels: &[usize],
    num_classes: usize,
    sample_weights: Option<&[f64]>,
) -> Result<()> {
    if x.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            x.nrows(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
        return Err(Error::Shape(format!(
            "label {bad} out of range (K={num_classes})"
        )));
    }
    if let Some(w) = sample_weights {
        if w.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} samples",
                w.len(),
                labels.len()
            )));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(
                "sample weights must be finite and nonnegative".into(),
            ));
        }
        if w.iter().all(|v| *v == 0.0) {
            return Err(Error::Config("sample weights are all zero".into()));
        }
    }
    Ok(())
}

/// Trains a model on `(x, labels)`.
///
/// `val`, when given, drives early stopping; otherwise the training
/// objective does.
pub fn train(
    x: &SparseMatrix,
    labels: &[usize],
    num_classes: usize,
    sample_weights: Option<&[f64]>,
    cfg: &ClassifierConfig,
    val: Option<(&SparseMatrix, &[usize])>,
) -> Result<Model> {
    cfg.validate()?;
    check_inputs(x, labels, num_classes, sample_weights)?;
    if let Some((vx, vy)) = val {
        check_inputs(vx, vy, num_classes, None)?;
        if vx.ncols() != x.ncols() {
            return Err(Error::Shape(
                "validation features have a different width".into(),
            ));
        }
    }
    let n = x.nrows();
    let sw: Vec<f64> = sample_weights.map_or_else(|| vec![1.0; n], <[f64]>::to_vec);
    let mean_w = sw.iter().sum::<f64>() / n as f64;

    let mut model = Model::zeros(x.ncols(), num_classes);
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut log = Vec::with_capacity(cfg.epochs);

    let mut grad_w = Array2::zeros(model.weights.raw_dim());
    let mut grad_b = vec![0.0; num_classes];
    let mut touched = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::stream(cfg.seed, "epoch", epoch as u64));
        for batch in order.chunks(cfg.batch_size) {
            let scale = 1.0 / (batch.len() as f64 * mean_w);
            accumulate(
                model.weights.view(),
                &model.bias,
                x,
                labels,
                &sw,
                batch,
                scale,
                &mut grad_w,
                &mut grad_b,
                &mut touched,
            );
            if cfg.l2 > 0.0 {
                model.weights *= 1.0 - 2.0 * cfg.learning_rate * cfg.l2;
            }
            touched.sort_unstable();
            touched.dedup();
            for &c in &touched {
                for (w, g) in model.weights.row_mut(c).iter_mut().zip(grad_w.row_mut(c)) {
                    *w -= cfg.learning_rate * *g;
                    *g = 0.0;
                }
            }
            touched.clear();
            for (b, g) in model.bias.iter_mut().zip(grad_b.iter_mut()) {
                *b -= cfg.learning_rate * *g;
                *g = 0.0;
            }
        }

        let loss = match val {
            Some((vx, vy)) => {
                objective(model.weights.view(), &model.bias, vx, vy, None, cfg.l2).loss
            }
            None => {
                objective(
                    model.weights.view(),
                    &model.bias,
                    x,
                    labels,
                    Some(&sw),
                    cfg.l2,
                )
                .loss
            }
        };
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        log.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best.weights.assign(&model.weights);
            best.bias.clone_from(&model.bias);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    best.training_log = log;
    Ok(best)
}
