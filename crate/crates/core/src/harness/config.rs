//! Flat `key=value` run configuration.
//!
//! Keys equal the [`RunConfig`] field names. Blank lines and lines starting
//! with `#` are ignored. Command line flags are applied through
//! [`RunConfig::set`] after the file.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::metrics::Metric;
use crate::crossval::Strategy;
use crate::featurize::FeaturizeConfig;
use crate::linear::ClassifierConfig;
use crate::synth::SynthConfig;
use crate::ulf::UlfConfig;
use crate::wscl::WsclConfig;
use crate::wscw::WscwConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BaselineMajority,
    Ulf,
    Wscw,
    Wscl,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BaselineMajority => "baseline_majority",
            Method::Ulf => "ulf",
            Method::Wscw => "wscw",
            Method::Wscl => "wscl",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline_majority" | "baseline" => Ok(Method::BaselineMajority),
            "ulf" => Ok(Method::Ulf),
            "wscw" => Ok(Method::Wscw),
            "wscl" => Ok(Method::Wscl),
            _ => Err(Error::Config(format!(
                "unknown method `{s}` (baseline_majority, ulf, wscw, wscl)"
            ))),
        }
    }
}

/// Everything needed to re-run one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub strategy: Strategy,
    pub p: f64,
    pub k: usize,
    pub lambda: f64,
    pub max_iters: usize,
    pub stall_patience: usize,
    pub raw_q: bool,
    pub partitions: usize,
    pub epsilon: f64,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub min_df: usize,
    pub max_features: Option<usize>,
    pub docs: Option<PathBuf>,
    pub z: Option<PathBuf>,
    pub t: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub dev_docs: Option<PathBuf>,
    pub dev_gold: Option<PathBuf>,
    pub test_docs: Option<PathBuf>,
    pub test_gold: Option<PathBuf>,
    pub run_dir: Option<PathBuf>,
    pub seed: u64,
    pub repeats: usize,
    pub metric: Metric,
    /// Worker threads for fold training; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let clf = ClassifierConfig::default();
        RunConfig {
            method: Method::Ulf,
            strategy: Strategy::BySignature,
            p: 0.5,
            k: 5,
            lambda: 0.0,
            max_iters: 20,
            stall_patience: 3,
            raw_q: false,
            partitions: 3,
            epsilon: 0.7,
            lr: clf.learning_rate,
            epochs: clf.epochs,
            patience: clf.patience,
            batch_size: clf.batch_size,
            l2: clf.l2,
            min_df: 1,
            max_features: None,
            docs: None,
            z: None,
            t: None,
            gold: None,
            dev_docs: None,
            dev_gold: None,
            test_docs: None,
            test_gold: None,
            run_dir: None,
            seed: 0,
            repeats: 1,
            metric: Metric::Accuracy,
            threads: 0,
        }
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn optional_usize(key: &str, v: &str) -> Result<Option<usize>> {
    match v.trim() {
        "" | "none" => Ok(None),
        s => value(key, s).map(Some),
    }
}

fn path(v: &str) -> Option<PathBuf> {
    let v = v.trim();
    (!v.is_empty() && v != "none").then(|| PathBuf::from(v))
}

/// Parses `key=value` lines.
pub fn parse_pairs(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(origin, n + 1, "expected key=value"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Reads a `key=value` file.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text, path)
}

impl RunConfig {
    /// Defaults overridden by the pairs in `path`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(read_pairs(path)?)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, pairs: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// Sets one field by name. `data` is a shorthand that points every path at
    /// the canonical file names inside a directory.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "method" => self.method = value(key, v)?,
            "strategy" => self.strategy = v.trim().parse()?,
            "p" => self.p = value(key, v)?,
            "k" => self.k = value(key, v)?,
            "lambda" => self.lambda = value(key, v)?,
            "max_iters" => self.max_iters = value(key, v)?,
            "stall_patience" => self.stall_patience = value(key, v)?,
            "raw_q" => self.raw_q = value(key, v)?,
            "partitions" => self.partitions = value(key, v)?,
            "epsilon" => self.epsilon = value(key, v)?,
            "lr" => self.lr = value(key, v)?,
            "epochs" => self.epochs = value(key, v)?,
            "patience" => self.patience = value(key, v)?,
            "batch_size" => self.batch_size = value(key, v)?,
            "l2" => self.l2 = value(key, v)?,
            "min_df" => self.min_df = value(key, v)?,
            "max_features" => self.max_features = optional_usize(key, v)?,
            "docs" => self.docs = path(v),
            "z" => self.z = path(v),
            "t" => self.t = path(v),
            "gold" => self.gold = path(v),
            "dev_docs" => self.dev_docs = path(v),
            "dev_gold" => self.dev_gold = path(v),
            "test_docs" => self.test_docs = path(v),
            "test_gold" => self.test_gold = path(v),
            "run_dir" => self.run_dir = path(v),
            "seed" => self.seed = value(key, v)?,
            "repeats" => self.repeats = value(key, v)?,
            "metric" => self.metric = v.trim().parse()?,
            "threads" => self.threads = value(key, v)?,
            "data" => self.set_data_dir(Path::new(v.trim())),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn set_data_dir(&mut self, dir: &Path) {
        let existing = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        self.docs = Some(dir.join("docs.tsv"));
        self.z = Some(dir.join("z.tsv"));
        self.t = Some(dir.join("t.tsv"));
        self.gold = existing("gold.tsv");
        self.dev_docs = existing("dev_docs.tsv");
        self.dev_gold = existing("dev_gold.tsv");
        self.test_docs = existing("test_docs.tsv");
        self.test_gold = existing("test_gold.tsv");
    }

    /// `key=value` snapshot that [`RunConfig::from_file`] reads back to an
    /// equal config.
    pub fn to_pairs_text(&self) -> String {
        let p = |v: &Option<PathBuf>| {
            v.as_ref()
                .map_or("none".to_string(), |p| p.display().to_string())
        };
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        put("method", self.method.to_string());
        put("strategy", self.strategy.to_string());
        put("p", self.p.to_string());
        put("k", self.k.to_string());
        put("lambda", self.lambda.to_string());
        put("max_iters", self.max_iters.to_string());
        put("stall_patience", self.stall_patience.to_string());
        put("raw_q", self.raw_q.to_string());
        put("partitions", self.partitions.to_string());
        put("epsilon", self.epsilon.to_string());
        put("lr", self.lr.to_string());
        put("epochs", self.epochs.to_string());
        put("patience", self.patience.to_string());
        put("batch_size", self.batch_size.to_string());
        put("l2", self.l2.to_string());
        put("min_df", self.min_df.to_string());
        put(
            "max_features",
            self.max_features.map_or("none".into(), |m| m.to_string()),
        );
        put("docs", p(&self.docs));
        put("z", p(&self.z));
        put("t", p(&self.t));
        put("gold", p(&self.gold));
        put("dev_docs", p(&self.dev_docs));
        put("dev_gold", p(&self.dev_gold));
        put("test_docs", p(&self.test_docs));
        put("test_gold", p(&self.test_gold));
        put("run_dir", p(&self.run_dir));
        put("seed", self.seed.to_string());
        put("repeats", self.repeats.to_string());
        put("metric", self.metric.to_string());
        put("threads", self.threads.to_string());
        out
    }

    pub fn featurize(&self) -> FeaturizeConfig {
        FeaturizeConfig {
            min_df: self.min_df,
            max_features: self.max_features,
        }
    }

    pub fn classifier(&self, seed: u64) -> ClassifierConfig {
        ClassifierConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            l2: self.l2,
            seed,
        }
    }

    pub fn ulf(&self, seed: u64) -> UlfConfig {
        UlfConfig {
            p: self.p,
            k: self.k,
            strategy: self.strategy,
            lambda_rate: self.lambda,
            max_iters: self.max_iters,
            stall_patience: self.stall_patience,
            seed,
            raw_q: self.raw_q,
            featurize: self.featurize(),
            classifier: self.classifier(seed),
        }
    }

    pub fn wscw(&self, seed: u64) -> WscwConfig {
        WscwConfig {
            k: self.k,
            partitions: self.partitions,
            epsilon: self.epsilon,
            seed,
            featurize: self.featurize(),
            classifier: self.classifier(seed),
        }
    }

    pub fn wscl(&self, seed: u64) -> WsclConfig {
        WsclConfig {
            k: self.k,
            strategy: self.strategy,
            lambda_rate: self.lambda,
            seed,
            featurize: self.featurize(),
            classifier: self.classifier(seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.docs.is_none() || self.z.is_none() || self.t.is_none() {
            return Err(Error::Config(
                "docs, z and t are required (or set `data`)".into(),
            ));
        }
        if self.dev_docs.is_some() != self.dev_gold.is_some() {
            return Err(Error::Config(
                "dev_docs and dev_gold must be given together".into(),
            ));
        }
        if self.test_docs.is_some() != self.test_gold.is_some() {
            return Err(Error::Config(
                "test_docs and test_gold must be given together".into(),
            ));
        }
        match self.method {
            Method::BaselineMajority => self.classifier(0).validate(),
            Method::Ulf => self.ulf(0).validate(),
            Method::Wscw => self.wscw(0).validate(),
            Method::Wscl => self.wscl(0).validate(),
        }
    }
}

/// Synthetic dataset generation job: the generator settings plus where to
/// write the train, dev and test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthJob {
    pub synth: SynthConfig,
    pub out: Option<PathBuf>,
    pub dev_samples: usize,
    pub test_samples: usize,
}

impl Default for SynthJob {
    fn default() -> Self {
        SynthJob {
            synth: SynthConfig::default(),
            out: None,
            dev_samples: 500,
            test_samples: 1000,
        }
    }
}

impl SynthJob {
    pub fn apply(&mut self, pairs: impl IntoIterator<Item = (String, String)>) -> Result<()> {
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    /// `lf_precision` takes one value or a comma-separated list;
    /// `misallocated_lfs` takes `lf:class` pairs separated by commas.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.synth;
        match key {
            "n_samples" => s.n_samples = value(key, v)?,
            "n_classes" => s.n_classes = value(key, v)?,
            "n_lfs" => s.n_lfs = value(key, v)?,
            "lf_precision" => {
                s.lf_precision = v.split(',').map(|x| value(key, x)).collect::<Result<_>>()?;
            }
            "coverage_target" => s.coverage_target = value(key, v)?,
            "misallocated_lfs" => {
                s.misallocated_lfs = v
                    .split(',')
                    .map(str::trim)
                    .filter(|x| !x.is_empty() && *x != "none")
                    .map(|x| {
                        let (lf, c) = x.split_once(':').ok_or_else(|| {
                            Error::Config(format!("expected lf:class, got `{x}`"))
                        })?;
                        Ok((value(key, lf)?, value(key, c)?))
                    })
                    .collect::<Result<_>>()?;
            }
            "vocab_size" => s.vocab_size = value(key, v)?,
            "words_per_doc" => s.words_per_doc = value(key, v)?,
            "own_word_rate" => s.own_word_rate = value(key, v)?,
            "seed" => s.seed = value(key, v)?,
            "out" => self.out = path(v),
            "dev_samples" => self.dev_samples = value(key, v)?,
            "test_samples" => self.test_samples = value(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Widens a single precision value to every LF.
    pub fn finish(mut self) -> Result<Self> {
        let s = &mut self.synth;
        if s.lf_precision.len() == 1 && s.n_lfs != 1 {
            s.lf_precision = vec![s.lf_precision[0]; s.n_lfs];
        }
        s.validate()?;
        Ok(self)
    }
}
