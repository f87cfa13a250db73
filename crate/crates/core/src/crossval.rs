//! Fold plans and out-of-sample class probabilities.
//!
//! Three splitting strategies are supported:
//!
//! * [`Strategy::Random`]: matched samples are shuffled into `k` test folds.
//! * [`Strategy::ByLf`]: LFs are shuffled into `k` folds; fold `i` tests every
//!   matched sample hit by an LF of the fold and trains on the samples whose
//!   signature is disjoint from it. A sample may be tested by several folds.
//! * [`Strategy::BySignature`]: distinct signatures are shuffled into `k`
//!   folds; fold `i` tests the samples whose signature lies in it and trains on
//!   all other matched samples.
//!
//! Samples without any LF match are dealt round-robin (after a seeded shuffle)
//! to exactly one test fold. Training folds admit unmatched samples from other
//! folds at the rate `λ`: `min(available, ⌊|matched train| / λ⌋)` of them, none
//! when `λ = 0`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Signature, WeakDataset};
use crate::featurize::{fit_vocabulary, transform, FeaturizeConfig, Vocabulary};
use crate::linear::{self, ClassifierConfig, Model};
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Random,
    ByLf,
    BySignature,
}

impl Strategy {
    pub fn short_name(self) -> &'static str {
        match self {
            Strategy::Random => "rndm",
            Strategy::ByLf => "lfs",
            Strategy::BySignature => "sgn",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rndm" | "random" => Ok(Strategy::Random),
            "lfs" | "by_lf" => Ok(Strategy::ByLf),
            "sgn" | "by_signature" => Ok(Strategy::BySignature),
            _ => Err(Error::Config(format!(
                "unknown strategy `{s}` (rndm, lfs, sgn)"
            ))),
        }
    }
}

/// Sample indices of one fold, both sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPlan {
    pub strategy: Strategy,
    pub k: usize,
    pub lambda_rate: f64,
    pub seed: u64,
    pub folds: Vec<Fold>,
    /// LF groups `f_i` for [`Strategy::ByLf`].
    pub lf_folds: Option<Vec<Vec<usize>>>,
    /// Signature groups `f_i` for [`Strategy::BySignature`].
    pub signature_folds: Option<Vec<Vec<Vec<usize>>>>,
}

impl FoldPlan {
    /// Number of test folds each sample belongs to.
    pub fn test_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        for f in &self.folds {
            for &i in &f.test {
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Builds a plan with the given strategy.
pub fn plan(
    ds: &WeakDataset,
    strategy: Strategy,
    k: usize,
    lambda_rate: f64,
    seed: u64,
) -> Result<FoldPlan> {
    match strategy {
        Strategy::Random => plan_random(ds, k, lambda_rate, seed),
        Strategy::ByLf => plan_by_lf(ds, k, lambda_rate, seed),
        Strategy::BySignature => plan_by_signature(ds, k, lambda_rate, seed),
    }
}

fn check_common(k: usize, lambda_rate: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::Plan(format!("k must be at least 2, got {k}")));
    }
    if !(lambda_rate >= 0.0 && lambda_rate.is_finite()) {
        return Err(Error::Plan(format!(
            "lambda must be nonnegative, got {lambda_rate}"
        )));
    }
    Ok(())
}

/// Splits `items` into `k` contiguous chunks whose sizes differ by at most one.
fn chunks<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let n = items.len();
    (0..k)
        .map(|i| items[i * n / k..(i + 1) * n / k].to_vec())
        .collect()
}

/// Adds the unmatched samples to the matched test/train sets.
fn finish(
    ds: &WeakDataset,
    strategy: Strategy,
    k: usize,
    lambda_rate: f64,
    seed: u64,
    tests: Vec<Vec<usize>>,
    trains: Vec<Vec<usize>>,
) -> Vec<Fold> {
    let mut unmatched = ds.unmatched();
    unmatched.shuffle(&mut seed::stream(seed, "unmatched", 0));
    let mut home = vec![usize::MAX; ds.len()];
    for (pos, &i) in unmatched.iter().enumerate() {
        home[i] = pos % k;
    }
    unmatched.sort_unstable();

    tests
        .into_iter()
        .zip(trains)
        .enumerate()
        .map(|(f, (mut test, mut train))| {
            test.extend(unmatched.iter().copied().filter(|&i| home[i] == f));
            if lambda_rate > 0.0 {
                let mut available: Vec<usize> = unmatched
                    .iter()
                    .copied()
                    .filter(|&i| home[i] != f)
                    .collect();
                let cap = (train.len() as f64 / lambda_rate).floor() as usize;
                let take = cap.min(available.len());
                available.shuffle(&mut seed::stream(seed, strategy.short_name(), f as u64));
                train.extend_from_slice(&available[..take]);
            }
            test.sort_unstable();
            train.sort_unstable();
            Fold { train, test }
        })
        .collect()
}

/// Standard k-fold over the matched samples.
pub fn plan_random(ds: &WeakDataset, k: usize, lambda_rate: f64, seed: u64) -> Result<FoldPlan> {
    check_common(k, lambda_rate)?;
    let mut matched = ds.matched();
    if k > matched.len() {
        return Err(Error::Plan(format!(
            "k too large: k={k} but only {} matched samples",
            matched.len()
        )));
    }
    matched.shuffle(&mut seed::stream(seed, "random", 0));
    let tests = chunks(&matched, k);
    let trains = tests
        .iter()
        .map(|test| {
            let held: BTreeSet<usize> = test.iter().copied().collect();
            let mut train: Vec<usize> = matched
                .iter()
                .copied()
                .filter(|i| !held.contains(i))
                .collect();
            train.sort_unstable();
            train
        })
        .collect();
    Ok(FoldPlan {
        strategy: Strategy::Random,
        k,
        lambda_rate,
        seed,
        folds: finish(ds, Strategy::Random, k, lambda_rate, seed, tests, trains),
        lf_folds: None,
        signature_folds: None,
    })
}

/// Folds over LFs: training samples never match an LF of the held-out fold.
pub fn plan_by_lf(ds: &WeakDataset, k: usize, lambda_rate: f64, seed: u64) -> Result<FoldPlan> {
    check_common(k, lambda_rate)?;
    let l = ds.num_lfs();
    if k > l {
        return Err(Error::Plan(format!("k too large: k={k} but only {l} LFs")));
    }
    let mut lfs: Vec<usize> = (0..l).collect();
    lfs.shuffle(&mut seed::stream(seed, "lfs", 0));
    let mut lf_folds = chunks(&lfs, k);
    let mut fold_of = vec![0; l];
    for (f, group) in lf_folds.iter_mut().enumerate() {
        group.sort_unstable();
        for &lf in group.iter() {
            fold_of[lf] = f;
        }
    }

    let mut tests = vec![Vec::new(); k];
    let mut trains = vec![Vec::new(); k];
    for i in ds.matched() {
        let hit: BTreeSet<usize> = ds
            .signature(i)
            .lfs()
            .iter()
            .map(|&lf| fold_of[lf])
            .collect();
        for f in 0..k {
            if hit.contains(&f) {
                tests[f].push(i);
            } else {
                trains[f].push(i);
            }
        }
    }
    for f in 0..k {
        if trains[f].is_empty() {
            return Err(Error::Plan(format!("fold {f} has an empty training set")));
        }
        if tests[f].is_empty() {
            return Err(Error::Plan(format!("fold {f} has an empty test set")));
        }
    }
    Ok(FoldPlan {
        strategy: Strategy::ByLf,
        k,
        lambda_rate,
        seed,
        folds: finish(ds, Strategy::ByLf, k, lambda_rate, seed, tests, trains),
        lf_folds: Some(lf_folds),
        signature_folds: None,
    })
}

/// Folds over distinct signatures: samples sharing a signature share a test
/// fold. Training samples may still share individual LFs with test samples.
pub fn plan_by_signature(
    ds: &WeakDataset,
    k: usize,
    lambda_rate: f64,
    seed: u64,
) -> Result<FoldPlan> {
    check_common(k, lambda_rate)?;
    let distinct: BTreeSet<&Signature> = ds.signatures().iter().filter(|s| !s.is_empty()).collect();
    let mut distinct: Vec<&Signature> = distinct.into_iter().collect();
    if k > distinct.len() {
        return Err(Error::Plan(format!(
            "fewer distinct signatures ({}) than k={k}",
            distinct.len()
        )));
    }
    distinct.shuffle(&mut seed::stream(seed, "signatures", 0));
    let groups = chunks(&distinct, k);
    let fold_of: HashMap<&Signature, usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(f, g)| g.iter().map(move |s| (*s, f)))
        .collect();

    let mut tests = vec![Vec::new(); k];
    let mut trains = vec![Vec::new(); k];
    for i in ds.matched() {
        let home = fold_of[ds.signature(i)];
        for f in 0..k {
            if f == home {
                tests[f].push(i);
            } else {
                trains[f].push(i);
            }
        }
    }
    let signature_folds = groups
        .into_iter()
        .map(|g| {
            let mut g: Vec<Vec<usize>> = g.into_iter().map(|s| s.lfs().to_vec()).collect();
            g.sort_unstable();
            g
        })
        .collect();
    Ok(FoldPlan {
        strategy: Strategy::BySignature,
        k,
        lambda_rate,
        seed,
        folds: finish(
            ds,
            Strategy::BySignature,
            k,
            lambda_rate,
            seed,
            tests,
            trains,
        ),
        lf_folds: None,
        signature_folds: Some(signature_folds),
    })
}

/// Trains on one fold and predicts the held-out samples.
pub trait Learner: Sync {
    /// Returns one probability row per entry of `test`, in order.
    fn fit_predict(
        &self,
        ds: &WeakDataset,
        labels: &[usize],
        train: &[usize],
        test: &[usize],
        seed: u64,
    ) -> Result<Array2<f64>>;
}

/// TF-IDF features refitted on every training fold, then logistic regression.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TfidfLogistic {
    pub featurize: FeaturizeConfig,
    pub classifier: ClassifierConfig,
}

impl Learner for TfidfLogistic {
    fn fit_predict(
        &self,
        ds: &WeakDataset,
        labels: &[usize],
        train: &[usize],
        test: &[usize],
        seed: u64,
    ) -> Result<Array2<f64>> {
        let texts: Vec<&str> = train.iter().map(|&i| ds.text(i)).collect();
        let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let clf = TextClassifier::fit(
            &texts,
            &y,
            ds.num_classes(),
            None,
            &self.featurize,
            &self.classifier.with_seed(seed),
            None,
        )?;
        let test_texts: Vec<&str> = test.iter().map(|&i| ds.text(i)).collect();
        Ok(clf.predict_proba(&test_texts))
    }
}

/// Predicts `1/K` for everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformLearner;

impl Learner for UniformLearner {
    fn fit_predict(
        &self,
        ds: &WeakDataset,
        _: &[usize],
        _: &[usize],
        test: &[usize],
        _: u64,
    ) -> Result<Array2<f64>> {
        let k = ds.num_classes();
        Ok(Array2::from_elem((test.len(), k), 1.0 / k as f64))
    }
}

/// Predicts a one-hot row for a fixed label per sample.
#[derive(Debug, Clone, Default)]
pub struct EchoLearner {
    pub labels: Vec<usize>,
}

impl Learner for EchoLearner {
    fn fit_predict(
        &self,
        ds: &WeakDataset,
        _: &[usize],
        _: &[usize],
        test: &[usize],
        _: u64,
    ) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((test.len(), ds.num_classes()));
        for (r, &i) in test.iter().enumerate() {
            out[[r, self.labels[i]]] = 1.0;
        }
        Ok(out)
    }
}

/// A fitted vocabulary and logistic model over raw texts.
#[derive(Debug, Clone, PartialEq)]
pub struct TextClassifier {
    pub vocabulary: Vocabulary,
    pub model: Model,
}

impl TextClassifier {
    #[allow(clippy::too_many_arguments)]
    pub fn fit<S: AsRef<str>>(
        texts: &[S],
        labels: &[usize],
        num_classes: usize,
        sample_weights: Option<&[f64]>,
        featurize: &FeaturizeConfig,
        classifier: &ClassifierConfig,
        val: Option<(&[S], &[usize])>,
    ) -> Result<Self> {
        let vocabulary = fit_vocabulary(texts, featurize)?;
        let x = transform(texts, &vocabulary);
        let val_x = val.map(|(t, y)| (transform(t, &vocabulary), y));
        let model = linear::train(
            &x,
            labels,
            num_classes,
            sample_weights,
            classifier,
            val_x.as_ref().map(|(x, y)| (x, *y)),
        )?;
        Ok(TextClassifier { vocabulary, model })
    }

    pub fn predict_proba<S: AsRef<str>>(&self, texts: &[S]) -> Array2<f64> {
        self.model
            .predict_proba(&transform(texts, &self.vocabulary))
    }

    /// Argmax class per text, ties to the lowest index.
    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Vec<usize> {
        let p = self.predict_proba(texts);
        p.rows()
            .into_iter()
            .map(|r| argmax(r.iter().copied()))
            .collect()
    }

    /// Writes `vocabulary.json` and `model.json` into `dir`.
    pub fn save(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vocab = serde_json::to_string(&self.vocabulary).expect("vocabulary serializes");
        let path = dir.join("vocabulary.json");
        std::fs::write(&path, vocab).map_err(|e| Error::io(&path, e))?;
        self.model.save(&dir.join("model.json"))
    }

    pub fn load(dir: &std::path::Path) -> Result<Self> {
        let path = dir.join("vocabulary.json");
        let s = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let vocabulary: Vocabulary =
            serde_json::from_str(&s).map_err(|e| Error::ModelFormat(e.to_string()))?;
        Ok(TextClassifier {
            vocabulary: vocabulary.reindex(),
            model: Model::load(&dir.join("model.json"))?,
        })
    }
}

/// Index of the largest value, first one on ties.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (j, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (j, v);
        }
    }
    best.0
}

/// Out-of-sample probabilities `P̂` and how many fold models produced each row.
#[derive(Debug, Clone, PartialEq)]
pub struct OOSProbs {
    pub probs: Array2<f64>,
    pub prediction_count: Vec<usize>,
}

impl OOSProbs {
    pub fn len(&self) -> usize {
        self.prediction_count.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prediction_count.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.probs.ncols()
    }

    /// False for rows no fold model predicted.
    pub fn is_defined(&self, i: usize) -> bool {
        self.prediction_count[i] > 0
    }

    /// Hard label per sample (argmax, lowest index on ties).
    pub fn hard_labels(&self) -> Vec<usize> {
        self.probs
            .rows()
            .into_iter()
            .map(|r| argmax(r.iter().copied()))
            .collect()
    }
}

/// Trains one model per fold and averages the held-out predictions.
///
/// Folds run in parallel; the merge is done in fold order so the result does
/// not depend on scheduling.
pub fn estimate_oos<L: Learner + ?Sized>(
    ds: &WeakDataset,
    labels: &[usize],
    plan: &FoldPlan,
    learner: &L,
) -> Result<OOSProbs> {
    let n = ds.len();
    let k = ds.num_classes();
    if labels.len() != n {
        return Err(Error::Shape(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    for (f, fold) in plan.folds.iter().enumerate() {
        if fold.train.iter().chain(&fold.test).any(|&i| i >= n) {
            return Err(Error::Plan(format!(
                "fold {f} references a sample outside the dataset"
            )));
        }
    }
    let per_fold: Vec<Array2<f64>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            if fold.test.is_empty() {
                return Ok(Array2::zeros((0, k)));
            }
            let rows = learner
                .fit_predict(
                    ds,
                    labels,
                    &fold.train,
                    &fold.test,
                    seed::derive(plan.seed, "fold", f as u64),
                )
                .map_err(|e| e.in_fold(f))?;
            if rows.dim() != (fold.test.len(), k) {
                return Err(Error::Shape(format!(
                    "learner returned {:?} for {} test samples",
                    rows.dim(),
                    fold.test.len()
                ))
                .in_fold(f));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut probs = Array2::zeros((n, k));
    let mut prediction_count = vec![0; n];
    for (fold, rows) in plan.folds.iter().zip(&per_fold) {
        for (r, &i) in fold.test.iter().enumerate() {
            let mut dst = probs.row_mut(i);
            dst += &rows.row(r);
            prediction_count[i] += 1;
        }
    }
    for (i, &c) in prediction_count.iter().enumerate() {
        if c > 1 {
            probs.row_mut(i).mapv_inplace(|v| v / c as f64);
        }
    }
    Ok(OOSProbs {
        probs,
        prediction_count,
    })
}
