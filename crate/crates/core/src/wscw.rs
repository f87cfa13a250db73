//! Weakly supervised CrossWeigh: repeated LF-disjoint cross-validation flags
//! samples whose out-of-fold prediction disagrees with the noisy label, and
//! the final classifier downweights each sample by `epsilon^flags`.

use serde::Serialize;

use crate::corpus::{majority_vote, LabelVector, WeakDataset};
use crate::crossval::{estimate_oos, plan_by_lf, Learner, TextClassifier, TfidfLogistic};
use crate::featurize::FeaturizeConfig;
use crate::linear::ClassifierConfig;
use crate::seed;
use crate::ulf::train_final;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WscwConfig {
    pub k: usize,
    /// Number of independent LF partitions.
    pub partitions: usize,
    /// Weight multiplier applied once per disagreeing partition.
    pub epsilon: f64,
    pub seed: u64,
    pub featurize: FeaturizeConfig,
    pub classifier: ClassifierConfig,
}

impl Default for WscwConfig {
    fn default() -> Self {
        WscwConfig {
            k: 5,
            partitions: 3,
            epsilon: 0.7,
            seed: 0,
            featurize: FeaturizeConfig::default(),
            classifier: ClassifierConfig::default(),
        }
    }
}

impl WscwConfig {
    pub fn validate(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        self.classifier.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleWeights {
    pub w: Vec<f64>,
    /// Number of partitions in which the sample was flagged.
    pub flags: Vec<usize>,
}

impl SampleWeights {
    pub fn flagged(&self) -> Vec<usize> {
        (0..self.flags.len())
            .filter(|&i| self.flags[i] > 0)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct WscwResult {
    pub weights: SampleWeights,
    pub noisy_labels: LabelVector,
    pub model: TextClassifier,
}

/// Counts, per sample, the partitions whose averaged out-of-fold prediction
/// disagrees with `noisy`. Unmatched samples are never flagged.
pub fn disagreement_flags<L: Learner + ?Sized>(
    ds: &WeakDataset,
    noisy: &LabelVector,
    cfg: &WscwConfig,
    learner: &L,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let mut flags = vec![0; ds.len()];
    for r in 0..cfg.partitions {
        let plan = plan_by_lf(ds, cfg.k, 0.0, seed::derive(cfg.seed, "wscw", r as u64))?;
        let oos = estimate_oos(ds, noisy, &plan, learner)?;
        let predicted = oos.hard_labels();
        for i in 0..ds.len() {
            if ds.is_matched(i) && oos.is_defined(i) && predicted[i] != noisy[i] {
                flags[i] += 1;
            }
        }
    }
    Ok(flags)
}

/// `epsilon^flags` per sample.
pub fn weights_from_flags(flags: Vec<usize>, epsilon: f64) -> SampleWeights {
    let w = flags.iter().map(|&c| epsilon.powi(c as i32)).collect();
    SampleWeights { w, flags }
}

/// WSCW with majority-vote labels and the TF-IDF logistic learner.
pub fn run_wscw(ds: &WeakDataset, cfg: &WscwConfig) -> Result<WscwResult> {
    let noisy = majority_vote(ds, ds.t(), cfg.seed);
    let learner = TfidfLogistic {
        featurize: cfg.featurize,
        classifier: cfg.classifier,
    };
    run_wscw_with(ds, noisy, cfg, &learner)
}

/// WSCW over given noisy labels and a custom cross-validation learner.
pub fn run_wscw_with<L: Learner + ?Sized>(
    ds: &WeakDataset,
    noisy: LabelVector,
    cfg: &WscwConfig,
    learner: &L,
) -> Result<WscwResult> {
    let flags = disagreement_flags(ds, &noisy, cfg, learner)?;
    let weights = weights_from_flags(flags, cfg.epsilon);
    let model = train_final(
        ds,
        &noisy,
        Some(&weights.w),
        &cfg.featurize,
        &cfg.classifier,
        cfg.seed,
    )?;
    Ok(WscwResult {
        weights,
        noisy_labels: noisy,
        model,
    })
}
