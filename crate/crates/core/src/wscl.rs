//! Weakly supervised Cleanlab: a class-to-class confident joint estimated
//! from LF-aware cross-validation, calibrated to the noisy-label prior, then
//! used to prune the most likely mislabeled samples.
//!
//! Only matched samples take part; unmatched samples carry random labels and
//! are always kept.

use ndarray::Array2;
use serde::Serialize;

use crate::confidence::{class_thresholds, confident_labels, ConfidentLabels};
use crate::corpus::{majority_vote, LabelVector, WeakDataset};
use crate::crossval::{
    self, estimate_oos, Learner, OOSProbs, Strategy, TextClassifier, TfidfLogistic,
};
use crate::featurize::FeaturizeConfig;
use crate::linear::ClassifierConfig;
use crate::ulf::DenoiseResult;
use crate::{seed, Error, Result};

/// `C[j][l]`: samples with noisy label `j` and confident label `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassConfidentJoint {
    pub c: Array2<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PruneMask {
    pub keep: Vec<bool>,
    /// Samples pruned on behalf of each `(noisy, confident)` cell.
    pub pruned: Array2<usize>,
    /// Requested minus available samples, per cell.
    pub shortfall: Array2<usize>,
    /// Pruned sample indices in pruning order.
    pub pruned_ids: Vec<usize>,
}

impl PruneMask {
    pub fn num_pruned(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WsclConfig {
    pub k: usize,
    pub strategy: Strategy,
    pub lambda_rate: f64,
    pub seed: u64,
    pub featurize: FeaturizeConfig,
    pub classifier: ClassifierConfig,
}

impl Default for WsclConfig {
    fn default() -> Self {
        WsclConfig {
            k: 5,
            strategy: Strategy::BySignature,
            lambda_rate: 0.0,
            seed: 0,
            featurize: FeaturizeConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl WsclConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategy == Strategy::Random {
            return Err(Error::Config(
                "WSCL folds are built from LFs: use lfs or sgn".into(),
            ));
        }
        self.classifier.validate()
    }
}

#[derive(Debug, Clone)]
pub struct WsclResult {
    pub result: DenoiseResult,
    pub joint: ClassConfidentJoint,
    pub calibrated: Array2<f64>,
    pub prune: PruneMask,
}

/// Counts `(noisy, confident)` pairs; samples without a confident label are
/// skipped.
pub fn class_confident_joint(
    noisy: &[usize],
    conf: &ConfidentLabels,
    num_classes: usize,
) -> ClassConfidentJoint {
    let mut c = Array2::zeros((num_classes, num_classes));
    for (&y, l) in noisy.iter().zip(&conf.labels) {
        if let Some(l) = *l {
            c[[y, l]] += 1;
        }
    }
    ClassConfidentJoint { c }
}

/// Scales row `j` of `C` to the noisy count of class `j`, then divides the
/// whole matrix by `N`. All-zero rows stay zero.
pub fn calibrate_joint(c: &ClassConfidentJoint, noisy: &[usize]) -> Array2<f64> {
    let k = c.c.nrows();
    let n = noisy.len() as f64;
    let mut counts = vec![0usize; k];
    for &y in noisy {
        counts[y] += 1;
    }
    let mut q = Array2::zeros((k, k));
    for (j, row) in c.c.rows().into_iter().enumerate() {
        let s: usize = row.sum();
        if s == 0 {
            continue;
        }
        let scale = counts[j] as f64 / s as f64;
        for (dst, &v) in q.row_mut(j).iter_mut().zip(row) {
            *dst = v as f64 * scale / n;
        }
    }
    q
}

/// Prunes by noise rate.
///
/// For every off-diagonal cell `(i, j)` in row-major order, `round(N · q[i][j])`
/// (half up) samples with noisy label `i` are pruned, choosing the largest
/// margins `P̂[·][j] − P̂[·][i]` first (lower sample index on ties) among those
/// not yet pruned.
pub fn prune(q: &Array2<f64>, probs: &OOSProbs, noisy: &[usize]) -> PruneMask {
    let n = noisy.len();
    let k = q.nrows();
    let mut keep = vec![true; n];
    let mut pruned = Array2::zeros((k, k));
    let mut shortfall = Array2::zeros((k, k));
    let mut pruned_ids = Vec::new();
    for i in 0..k {
        for j in (0..k).filter(|&j| j != i) {
            let want = (n as f64 * q[[i, j]] + 0.5).floor() as usize;
            if want == 0 {
                continue;
            }
            let mut candidates: Vec<(usize, f64)> = (0..n)
                .filter(|&s| keep[s] && noisy[s] == i && probs.is_defined(s))
                .map(|s| (s, probs.probs[[s, j]] - probs.probs[[s, i]]))
                .collect();
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let take = want.min(candidates.len());
            for &(s, _) in &candidates[..take] {
                keep[s] = false;
                pruned_ids.push(s);
            }
            pruned[[i, j]] = take;
            shortfall[[i, j]] = want - take;
        }
    }
    PruneMask {
        keep,
        pruned,
        shortfall,
        pruned_ids,
    }
}

/// WSCL with majority-vote labels and the TF-IDF logistic learner.
pub fn run_wscl(ds: &WeakDataset, cfg: &WsclConfig) -> Result<WsclResult> {
    let noisy = majority_vote(ds, ds.t(), cfg.seed);
    let learner = TfidfLogistic {
        featurize: cfg.featurize,
        classifier: cfg.classifier,
    };
    run_wscl_with(ds, noisy, cfg, &learner)
}

/// WSCL over given noisy labels and a custom cross-validation learner.
pub fn run_wscl_with<L: Learner + ?Sized>(
    ds: &WeakDataset,
    noisy: LabelVector,
    cfg: &WsclConfig,
    learner: &L,
) -> Result<WsclResult> {
    cfg.validate()?;
    let plan = crossval::plan(
        ds,
        cfg.strategy,
        cfg.k,
        cfg.lambda_rate,
        seed::derive(cfg.seed, "plan", 0),
    )?;
    let oos = estimate_oos(ds, &noisy, &plan, learner)?;

    // restrict the estimate to matched samples
    let matched = ds.matched();
    let sub_noisy: Vec<usize> = matched.iter().map(|&i| noisy[i]).collect();
    let sub_probs = OOSProbs {
        probs: oos.probs.select(ndarray::Axis(0), &matched),
        prediction_count: matched.iter().map(|&i| oos.prediction_count[i]).collect(),
    };
    let th = class_thresholds(&sub_probs, &sub_noisy);
    let conf = confident_labels(&sub_probs, &th);
    let joint = class_confident_joint(&sub_noisy, &conf, ds.num_classes());
    let calibrated = calibrate_joint(&joint, &sub_noisy);
    let sub_mask = prune(&calibrated, &sub_probs, &sub_noisy);

    let mut keep = vec![true; ds.len()];
    for (s, &i) in matched.iter().enumerate() {
        keep[i] = sub_mask.keep[s];
    }
    let prune = PruneMask {
        keep,
        pruned_ids: sub_mask.pruned_ids.iter().map(|&s| matched[s]).collect(),
        ..sub_mask
    };

    let kept: Vec<usize> = (0..ds.len()).filter(|&i| prune.keep[i]).collect();
    if kept.is_empty() {
        return Err(Error::Config("every sample was pruned".into()));
    }
    let texts: Vec<&str> = kept.iter().map(|&i| ds.text(i)).collect();
    let labels: Vec<usize> = kept.iter().map(|&i| noisy[i]).collect();
    let model = TextClassifier::fit(
        &texts,
        &labels,
        ds.num_classes(),
        None,
        &cfg.featurize,
        &cfg.classifier.with_seed(seed::derive(cfg.seed, "final", 0)),
        None,
    )?;

    Ok(WsclResult {
        result: DenoiseResult {
            final_labels: noisy,
            refined_t: ds.t().to_owned(),
            iterations_run: 1,
            change_fractions: Vec::new(),
            diagnostics: Vec::new(),
            model,
        },
        joint,
        calibrated,
        prune,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn joint_examples() {
        let conf = ConfidentLabels {
            labels: vec![Some(0), Some(1), Some(1), None],
        };
        let j = class_confident_joint(&[0, 1, 1, 0], &conf, 2);
        assert_eq!(j.c, array![[1, 0], [0, 2]]);
        let none = ConfidentLabels {
            labels: vec![None; 4],
        };
        assert_eq!(class_confident_joint(&[0, 1, 1, 0], &none, 2).c.sum(), 0);
    }

    #[test]
    fn calibration_examples() {
        let c = ClassConfidentJoint {
            c: array![[5, 0], [0, 5]],
        };
        let noisy: Vec<usize> = [0; 5].into_iter().chain([1; 5]).collect();
        assert_eq!(calibrate_joint(&c, &noisy), array![[0.5, 0.0], [0.0, 0.5]]);

        let c = ClassConfidentJoint {
            c: array![[3, 1], [0, 0]],
        };
        let noisy: Vec<usize> = [0; 8].into_iter().chain([1; 8]).collect();
        assert_eq!(
            calibrate_joint(&c, &noisy),
            array![[0.375, 0.125], [0.0, 0.0]]
        );

        let c = ClassConfidentJoint {
            c: Array2::zeros((2, 2)),
        };
        assert_eq!(calibrate_joint(&c, &noisy).sum(), 0.0);
    }

    fn probs(rows: Vec<[f64; 2]>) -> OOSProbs {
        let n = rows.len();
        OOSProbs {
            probs: Array2::from_shape_fn((n, 2), |(i, j)| rows[i][j]),
            prediction_count: vec![1; n],
        }
    }

    #[test]
    fn diagonal_q_keeps_everything() {
        let p = probs(vec![[0.1, 0.9], [0.9, 0.1]]);
        let m = prune(&array![[0.5, 0.0], [0.0, 0.5]], &p, &[0, 1]);
        assert!(m.keep.iter().all(|&k| k));
    }

    #[test]
    fn largest_margins_are_pruned() {
        // margins P[1] - P[0]: 0.8, 0.6, -0.2
        let p = probs(vec![[0.1, 0.9], [0.2, 0.8], [0.6, 0.4], [0.5, 0.5]]);
        let noisy = [0, 0, 0, 1];
        let q = array![[0.0, 2.0 / 4.0], [0.0, 0.0]];
        let m = prune(&q, &p, &noisy);
        assert_eq!(m.keep, vec![false, false, true, true]);
        assert_eq!(m.pruned_ids, vec![0, 1]);
    }

    #[test]
    fn shortfall_is_recorded() {
        let p = probs(vec![[0.1, 0.9], [0.5, 0.5], [0.5, 0.5]]);
        let m = prune(&array![[0.0, 1.0], [0.0, 0.0]], &p, &[0, 1, 1]);
        assert_eq!(m.pruned[[0, 1]], 1);
        assert_eq!(m.shortfall[[0, 1]], 2);
    }

    #[test]
    fn margin_ties_go_to_lower_index() {
        let p = probs(vec![[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]]);
        let m = prune(&array![[0.0, 1.0 / 3.0], [0.0, 0.0]], &p, &[0, 0, 0]);
        assert_eq!(m.pruned_ids, vec![0]);
    }
}
