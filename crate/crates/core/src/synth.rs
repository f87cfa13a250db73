//! Synthetic weak-supervision datasets with known gold labels.
//!
//! Vocabulary words `w0 .. w{V-1}` are split into `K` disjoint clusters
//! (`w{i}` belongs to class `i mod K`). A document draws `words_per_doc` words,
//! each from its own class cluster with probability `own_word_rate` and from
//! the whole vocabulary otherwise.
//!
//! LF `j` is a keyword rule for class `j mod K` with trigger token `lf{j}`.
//! The trigger is inserted into a document with probability `a` when the
//! document belongs to the LF's class and `b_j = a (1 - π_j) / ((K - 1) π_j)`
//! otherwise, so the LF's precision is `π_j` under uniform classes. The shared
//! rate `a` is solved by bisection to hit the coverage target.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::Serialize;

use crate::corpus::{one_hot_t, LabelVector, Signature, WeakDataset};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    pub n_lfs: usize,
    /// Precision of each LF.
    pub lf_precision: Vec<f64>,
    pub coverage_target: f64,
    /// `(lf, wrong class)` pairs written into `T` instead of the true class.
    pub misallocated_lfs: Vec<(usize, usize)>,
    pub vocab_size: usize,
    pub words_per_doc: usize,
    /// Probability that a document word comes from its own class cluster.
    pub own_word_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 1000,
            n_classes: 2,
            n_lfs: 10,
            lf_precision: vec![0.9; 10],
            coverage_target: 0.87,
            misallocated_lfs: Vec::new(),
            vocab_size: 200,
            words_per_doc: 20,
            own_word_rate: 0.6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// All LFs share one precision.
    pub fn uniform(
        n_samples: usize,
        n_classes: usize,
        n_lfs: usize,
        precision: f64,
        coverage: f64,
    ) -> Self {
        SynthConfig {
            n_samples,
            n_classes,
            n_lfs,
            lf_precision: vec![precision; n_lfs],
            coverage_target: coverage,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if self.n_classes < 2 {
            return bad(format!(
                "n_classes must be at least 2, got {}",
                self.n_classes
            ));
        }
        if self.n_lfs == 0 {
            return bad("n_lfs must be positive".into());
        }
        if self.lf_precision.len() != self.n_lfs {
            return bad(format!(
                "lf_precision has {} entries for {} LFs",
                self.lf_precision.len(),
                self.n_lfs
            ));
        }
        if let Some(p) = self.lf_precision.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return bad(format!("LF precision must lie in (0, 1], got {p}"));
        }
        if !(self.coverage_target > 0.0 && self.coverage_target <= 1.0) {
            return bad(format!(
                "coverage_target must lie in (0, 1], got {}",
                self.coverage_target
            ));
        }
        for &(lf, class) in &self.misallocated_lfs {
            if lf >= self.n_lfs || class >= self.n_classes {
                return bad(format!("misallocation ({lf}, {class}) out of range"));
            }
            if class == lf % self.n_classes {
                return bad(format!(
                    "misallocation ({lf}, {class}) names the LF's true class"
                ));
            }
        }
        if self.vocab_size < self.n_classes {
            return bad("vocab_size must be at least n_classes".into());
        }
        if !(0.0..=1.0).contains(&self.own_word_rate) {
            return bad(format!(
                "own_word_rate must lie in [0, 1], got {}",
                self.own_word_rate
            ));
        }
        Ok(())
    }

    /// True class of LF `lf`.
    pub fn lf_class(&self, lf: usize) -> usize {
        lf % self.n_classes
    }

    fn off_class_rate(&self, lf: usize, a: f64) -> f64 {
        let p = self.lf_precision[lf];
        a * (1.0 - p) / ((self.n_classes - 1) as f64 * p)
    }

    /// Firing probability of every LF on a sample of class `c`.
    fn rates(&self, a: f64, c: usize) -> Vec<f64> {
        (0..self.n_lfs)
            .map(|j| {
                if self.lf_class(j) == c {
                    a
                } else {
                    self.off_class_rate(j, a)
                }
            })
            .collect()
    }

    /// Expected coverage for own-class firing rate `a`.
    pub fn expected_coverage(&self, a: f64) -> f64 {
        let k = self.n_classes;
        let unmatched: f64 = (0..k)
            .map(|c| self.rates(a, c).iter().map(|r| 1.0 - r).product::<f64>())
            .sum::<f64>()
            / k as f64;
        1.0 - unmatched
    }

    /// Own-class firing rate that meets the coverage target.
    pub fn solve_rate(&self) -> Result<f64> {
        self.validate()?;
        let k1 = (self.n_classes - 1) as f64;
        let a_max = self
            .lf_precision
            .iter()
            .map(|&p| {
                if p >= 1.0 {
                    1.0
                } else {
                    (k1 * p / (1.0 - p)).min(1.0)
                }
            })
            .fold(1.0, f64::min);
        let best = self.expected_coverage(a_max);
        if best < self.coverage_target {
            return Err(Error::Infeasible(format!(
                "coverage {} is out of reach: at most {best:.4} with firing rate {a_max:.4}",
                self.coverage_target
            )));
        }
        let (mut lo, mut hi) = (0.0, a_max);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.expected_coverage(mid) < self.coverage_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

/// Generates a dataset and its gold labels.
pub fn generate(cfg: &SynthConfig) -> Result<(WeakDataset, LabelVector)> {
    let a = cfg.solve_rate()?;
    let k = cfg.n_classes;
    let mut rng = seed::stream(cfg.seed, "synth", 0);
    let clusters: Vec<Vec<usize>> = (0..k)
        .map(|c| (c..cfg.vocab_size).step_by(k).collect())
        .collect();
    let rates: Vec<Vec<f64>> = (0..k).map(|c| cfg.rates(a, c)).collect();

    let mut ids = Vec::with_capacity(cfg.n_samples);
    let mut texts = Vec::with_capacity(cfg.n_samples);
    let mut signatures = Vec::with_capacity(cfg.n_samples);
    let mut gold = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let y = rng.random_range(0..k);
        let mut words: Vec<String> = (0..cfg.words_per_doc)
            .map(|_| {
                let w = if rng.random_bool(cfg.own_word_rate) {
                    clusters[y][rng.random_range(0..clusters[y].len())]
                } else {
                    rng.random_range(0..cfg.vocab_size)
                };
                format!("w{w}")
            })
            .collect();
        let fired: Vec<usize> = (0..cfg.n_lfs)
            .filter(|&j| rng.random_bool(rates[y][j]))
            .collect();
        for &j in &fired {
            let at = rng.random_range(0..=words.len());
            words.insert(at, format!("lf{j}"));
        }
        ids.push(format!("s{i}"));
        texts.push(words.join(" "));
        signatures.push(Signature::new(fired));
        gold.push(y);
    }

    let mut assignment: Vec<usize> = (0..cfg.n_lfs).map(|j| cfg.lf_class(j)).collect();
    for &(lf, class) in &cfg.misallocated_lfs {
        assignment[lf] = class;
    }
    let t = one_hot_t(&assignment, k);
    let ds = WeakDataset::new(ids, texts, signatures, cfg.n_lfs, t, Some(gold.clone()))?;
    let was_unmatched = ds.unmatched_mask();
    Ok((
        ds,
        LabelVector {
            labels: gold,
            was_unmatched,
        },
    ))
}

/// A held-out split drawn from the same generator under a derived seed.
pub fn generate_split(cfg: &SynthConfig, split: &str) -> Result<(WeakDataset, LabelVector)> {
    let cfg = SynthConfig {
        seed: seed::derive(cfg.seed, split, 0),
        ..cfg.clone()
    };
    generate(&cfg)
}

/// Replaces a `rate` fraction of the eligible labels by a different class
/// drawn uniformly. Returns the new labels and the flipped mask.
pub fn inject_flips(
    labels: &LabelVector,
    num_classes: usize,
    rate: f64,
    eligible: &[bool],
    seed: u64,
) -> (LabelVector, Vec<bool>) {
    let mut rng = seed::stream(seed, "flips", 0);
    let mut pool: Vec<usize> = (0..labels.len()).filter(|&i| eligible[i]).collect();
    pool.shuffle(&mut rng);
    let m = (rate * pool.len() as f64).round() as usize;
    let mut out = labels.clone();
    let mut flipped = vec![false; labels.len()];
    for &i in &pool[..m] {
        let shift = rng.random_range(1..num_classes);
        out.labels[i] = (labels[i] + shift) % num_classes;
        flipped[i] = true;
    }
    (out, flipped)
}
