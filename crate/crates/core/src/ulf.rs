//! Unsupervised refinement of the LF-to-class matrix.
//!
//! One iteration:
//!
//! 1. noisy labels `Y` by majority vote over `Z · T̂`;
//! 2. out-of-sample probabilities `P̂` under the configured fold plan;
//! 3. thresholds and confident labels `ŷ`;
//! 4. LF-confident counts `C[l][j] = |{i : l ∈ L_i, ŷ_i = j}|`, calibrated so
//!    every LF keeps its match total, then row-normalized and mixed into `T̂`
//!    with weight `p`;
//! 5. `Y_upd` by majority vote over `Z · T̂`, unmatched samples keeping their
//!    label from `Y`;
//! 6. unmatched samples adopt their confident label, which the next
//!    iteration's `Y` carries over.
//!
//! The loop stops after `max_iters` iterations or once `Y_upd` has not changed
//! for `stall_patience` consecutive iterations. A final classifier is trained
//! on all samples with the last `Y_upd`.

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::confidence::{
    class_thresholds, confident_label, confident_labels, ConfidentLabels, Thresholds,
};
use crate::corpus::{majority_vote, LabelVector, WeakDataset};
use crate::crossval::{
    self, estimate_oos, Learner, OOSProbs, Strategy, TextClassifier, TfidfLogistic,
};
use crate::featurize::FeaturizeConfig;
use crate::linear::ClassifierConfig;
use crate::seed;
use crate::{Error, Result};

/// `C[l][j]`: samples matched by LF `l` whose confident label is `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LfConfidentMatrix {
    pub c: Array2<usize>,
}

/// `Q̂`, the LF-confident matrix rescaled to the LF match totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedJoint {
    pub q: Array2<f64>,
    /// `Σ_i Z[i][l]` per LF.
    pub matches: Vec<usize>,
    /// False for LFs that never co-occurred with a confident label.
    pub informative: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UlfConfig {
    /// Weight of the estimated allocation in the refined `T̂`.
    pub p: f64,
    pub k: usize,
    pub strategy: Strategy,
    pub lambda_rate: f64,
    pub max_iters: usize,
    pub stall_patience: usize,
    pub seed: u64,
    /// Mix the count-scaled `Q̂` instead of its row-normalized form.
    pub raw_q: bool,
    pub featurize: FeaturizeConfig,
    pub classifier: ClassifierConfig,
}

impl Default for UlfConfig {
    fn default() -> Self {
        UlfConfig {
            p: 0.5,
            k: 5,
            strategy: Strategy::BySignature,
            lambda_rate: 0.0,
            max_iters: 20,
            stall_patience: 3,
            seed: 0,
            raw_q: false,
            featurize: FeaturizeConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl UlfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!(
                "p must lie in [0, 1], got {}",
                self.p
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if !(self.lambda_rate >= 0.0 && self.lambda_rate.is_finite()) {
            return Err(Error::Config(format!(
                "lambda must be nonnegative, got {}",
                self.lambda_rate
            )));
        }
        if self.max_iters == 0 || self.stall_patience == 0 {
            return Err(Error::Config(
                "max_iters and stall_patience must be at least 1".into(),
            ));
        }
        self.classifier.validate()
    }

    fn learner(&self) -> TfidfLogistic {
        TfidfLogistic {
            featurize: self.featurize,
            classifier: self.classifier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    /// Fraction of all samples whose label changed in this iteration.
    pub change_fraction: f64,
    pub thresholds: Thresholds,
    pub num_confident: usize,
    pub informative_lfs: usize,
    pub t_hat: Array2<f64>,
}

/// Output of a denoising method.
#[derive(Debug, Clone)]
pub struct DenoiseResult {
    pub final_labels: LabelVector,
    pub refined_t: Array2<f64>,
    pub iterations_run: usize,
    pub change_fractions: Vec<f64>,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub model: TextClassifier,
}

/// Counts `(LF match, confident label)` co-occurrences.
pub fn lf_confident_matrix(ds: &WeakDataset, conf: &ConfidentLabels) -> LfConfidentMatrix {
    let mut c = Array2::zeros((ds.num_lfs(), ds.num_classes()));
    for (sig, label) in ds.signatures().iter().zip(&conf.labels) {
        if let Some(j) = *label {
            for &lf in sig.lfs() {
                c[[lf, j]] += 1;
            }
        }
    }
    LfConfidentMatrix { c }
}

/// Rescales each informative row of `C` so it sums to the LF's match count.
pub fn calibrate(c: &LfConfidentMatrix, ds: &WeakDataset) -> CalibratedJoint {
    let matches = ds.lf_match_counts();
    let mut q = Array2::zeros(c.c.raw_dim());
    let mut informative = vec![false; c.c.nrows()];
    for (l, row) in c.c.rows().into_iter().enumerate() {
        let s: usize = row.sum();
        if s == 0 {
            continue;
        }
        informative[l] = true;
        let scale = matches[l] as f64 / s as f64;
        for (dst, &v) in q.row_mut(l).iter_mut().zip(row) {
            *dst = v as f64 * scale;
        }
    }
    CalibratedJoint {
        q,
        matches,
        informative,
    }
}

/// `T̂[l] = p · Q̂[l] / Σ_j Q̂[l][j] + (1 − p) · T[l]` for informative rows;
/// other rows are copied unchanged.
pub fn refine_t(t: ArrayView2<'_, f64>, q: &CalibratedJoint, p: f64) -> Array2<f64> {
    mix(t, q, p, true)
}

/// Like [`refine_t`] but mixes the count-scaled `Q̂` rows directly.
pub fn refine_t_raw(t: ArrayView2<'_, f64>, q: &CalibratedJoint, p: f64) -> Array2<f64> {
    mix(t, q, p, false)
}

fn mix(t: ArrayView2<'_, f64>, q: &CalibratedJoint, p: f64, normalize: bool) -> Array2<f64> {
    let mut out = t.to_owned();
    for (l, mut row) in out.rows_mut().into_iter().enumerate() {
        if !q.informative[l] {
            continue;
        }
        let q_row = q.q.row(l);
        let total = if normalize { q_row.sum() } else { 1.0 };
        for (dst, &qv) in row.iter_mut().zip(q_row) {
            *dst = p * (qv / total) + (1.0 - p) * *dst;
        }
    }
    out
}

/// Unmatched samples (per `mask`) take their confident label when they have
/// one; everything else keeps `current`.
pub fn relabel_unmatched(
    probs: &OOSProbs,
    th: &Thresholds,
    mask: &[bool],
    current: &LabelVector,
) -> LabelVector {
    let mut out = current.clone();
    for (i, &unmatched) in mask.iter().enumerate() {
        if !unmatched || !probs.is_defined(i) {
            continue;
        }
        if let Some(j) = confident_label(probs.probs.row(i).iter().copied(), th) {
            out.labels[i] = j;
        }
    }
    out
}

/// Majority vote with the labels of unmatched samples taken from `carried`.
fn vote_with_carry(
    ds: &WeakDataset,
    t: ArrayView2<'_, f64>,
    seed: u64,
    carried: &LabelVector,
) -> LabelVector {
    let mut y = majority_vote(ds, t, seed);
    for (i, &u) in y.was_unmatched.clone().iter().enumerate() {
        if u {
            y.labels[i] = carried.labels[i];
        }
    }
    y
}

fn tie_seed(seed: u64, iteration: usize) -> u64 {
    if iteration == 0 {
        seed
    } else {
        seed::derive(seed, "iteration", iteration as u64)
    }
}

/// Trains a [`TextClassifier`] on every sample of `ds`.
pub fn train_final(
    ds: &WeakDataset,
    labels: &[usize],
    weights: Option<&[f64]>,
    featurize: &FeaturizeConfig,
    classifier: &ClassifierConfig,
    seed: u64,
) -> Result<TextClassifier> {
    TextClassifier::fit(
        ds.texts(),
        labels,
        ds.num_classes(),
        weights,
        featurize,
        &classifier.with_seed(seed::derive(seed, "final", 0)),
        None,
    )
}

/// Runs ULF with the TF-IDF logistic learner from `cfg`.
pub fn run_ulf(ds: &WeakDataset, cfg: &UlfConfig) -> Result<DenoiseResult> {
    run_ulf_with(ds, cfg, &cfg.learner())
}

/// One refinement pass. Returns the updated labels, the unmatched labels to
/// carry into the next pass, and diagnostics.
#[allow(clippy::too_many_arguments)]
fn iterate<L: Learner + ?Sized>(
    ds: &WeakDataset,
    cfg: &UlfConfig,
    learner: &L,
    it: usize,
    t_hat: ArrayView2<f64>,
    carried: &LabelVector,
    previous: &LabelVector,
    mask: &[bool],
) -> Result<(LabelVector, LabelVector, IterationDiagnostics)> {
    let tie = tie_seed(cfg.seed, it);
    let y = vote_with_carry(ds, t_hat, tie, carried);
    let plan = crossval::plan(
        ds,
        cfg.strategy,
        cfg.k,
        cfg.lambda_rate,
        seed::derive(cfg.seed, "plan", it as u64),
    )?;
    let oos = estimate_oos(ds, &y, &plan, learner)?;
    let th = class_thresholds(&oos, &y);
    let conf = confident_labels(&oos, &th);
    let q = calibrate(&lf_confident_matrix(ds, &conf), ds);
    let refined = if cfg.raw_q {
        refine_t_raw(t_hat, &q, cfg.p)
    } else {
        refine_t(t_hat, &q, cfg.p)
    };
    let updated = vote_with_carry(ds, refined.view(), tie, &y);
    let relabeled = relabel_unmatched(&oos, &th, mask, &y);
    let diag = IterationDiagnostics {
        iteration: it,
        change_fraction: updated.change_fraction(previous),
        thresholds: th,
        num_confident: conf.num_confident(),
        informative_lfs: q.informative.iter().filter(|&&b| b).count(),
        t_hat: refined,
    };
    Ok((updated, relabeled, diag))
}

/// Runs ULF with a custom cross-validation learner.
pub fn run_ulf_with<L: Learner + ?Sized>(
    ds: &WeakDataset,
    cfg: &UlfConfig,
    learner: &L,
) -> Result<DenoiseResult> {
    cfg.validate()?;
    let mask = ds.unmatched_mask();
    let mut t_hat = ds.t().to_owned();
    let mut carried = majority_vote(ds, t_hat.view(), tie_seed(cfg.seed, 0));
    let mut previous = carried.clone();
    let mut change_fractions = Vec::new();
    let mut diagnostics = Vec::new();
    let mut stall = 0;

    for it in 0..cfg.max_iters {
        let (updated, relabeled, diag) = iterate(
            ds,
            cfg,
            learner,
            it,
            t_hat.view(),
            &carried,
            &previous,
            &mask,
        )
        .map_err(|e| e.in_iteration(it))?;
        carried = relabeled;
        t_hat.assign(&diag.t_hat);
        change_fractions.push(diag.change_fraction);
        stall = if diag.change_fraction == 0.0 {
            stall + 1
        } else {
            0
        };
        diagnostics.push(diag);
        previous = updated;
        if stall >= cfg.stall_patience {
            break;
        }
    }

    let model = train_final(
        ds,
        &previous,
        None,
        &cfg.featurize,
        &cfg.classifier,
        cfg.seed,
    )?;
    Ok(DenoiseResult {
        final_labels: previous,
        refined_t: t_hat,
        iterations_run: diagnostics.len(),
        change_fractions,
        diagnostics,
        model,
    })
}
