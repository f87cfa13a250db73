//! Repeated runs of one method and the run directory layout.
//!
//! ```text
//! run_dir/
//!   config.txt            key=value snapshot
//!   seeds.json            master and per-repeat seeds
//!   metrics.json          MetricsReport
//!   timing.json           wall-clock seconds per repeat
//!   labels_corrected.tsv  id<TAB>label of the selected repeat
//!   t_refined.tsv         mapping matrix of the selected repeat
//!   model/                classifier of the selected repeat
//!   diagnostics/repeat_<r>/...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use serde::Serialize;

use super::config::{Method, RunConfig};
use super::metrics::{evaluate, summarize, Failure, Metric, MetricsReport};
use crate::corpus::{self, majority_vote, DatasetPaths, LabelVector, WeakDataset};
use crate::crossval::TextClassifier;
use crate::ulf::{run_ulf, train_final, IterationDiagnostics};
use crate::wscl::{run_wscl, ClassConfidentJoint, PruneMask};
use crate::wscw::{run_wscw, SampleWeights};
use crate::{seed, Error, Result};

/// Documents with gold labels, used for dev and test splits.
#[derive(Debug, Clone)]
pub struct LabeledTexts {
    pub ids: Vec<String>,
    pub texts: Vec<String>,
    pub gold: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: WeakDataset,
    pub dev: Option<LabeledTexts>,
    pub test: Option<LabeledTexts>,
}

fn labeled(docs: &Path, gold: &Path, num_classes: usize) -> Result<LabeledTexts> {
    let (ids, texts) = corpus::read_docs(docs)?;
    let gold = corpus::read_gold(gold, &ids, num_classes)?;
    Ok(LabeledTexts { ids, texts, gold })
}

/// Loads the training dataset and the optional dev and test splits.
pub fn load_splits(cfg: &RunConfig) -> Result<Splits> {
    let missing = || Error::Config("docs, z and t are required (or set `data`)".into());
    let paths = DatasetPaths {
        docs: cfg.docs.clone().ok_or_else(missing)?,
        z: cfg.z.clone().ok_or_else(missing)?,
        t: cfg.t.clone().ok_or_else(missing)?,
        gold: cfg.gold.clone(),
    };
    let train = corpus::load_dataset(&paths)?;
    let k = train.num_classes();
    let dev = match (&cfg.dev_docs, &cfg.dev_gold) {
        (Some(d), Some(g)) => Some(labeled(d, g, k)?),
        _ => None,
    };
    let test = match (&cfg.test_docs, &cfg.test_gold) {
        (Some(d), Some(g)) => Some(labeled(d, g, k)?),
        _ => None,
    };
    Ok(Splits { train, dev, test })
}

/// Method-specific output of one repeat.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Diagnostics {
    None,
    Ulf(Vec<IterationDiagnostics>),
    Wscw(SampleWeights),
    Wscl {
        joint: ClassConfidentJoint,
        calibrated: Array2<f64>,
        prune: PruneMask,
    },
}

#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub seed: u64,
    pub labels: LabelVector,
    pub refined_t: Array2<f64>,
    pub model: TextClassifier,
    pub diagnostics: Diagnostics,
    pub dev_score: Option<f64>,
    pub test_score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: MetricsReport,
    pub outcomes: Vec<Option<RepeatOutcome>>,
    pub seconds: Vec<f64>,
}

/// Seed of repeat `r`.
pub fn repeat_seed(master: u64, r: usize) -> u64 {
    seed::derive(master, "repeat", r as u64)
}

/// Runs the configured method once on `ds`.
pub fn run_method(
    ds: &WeakDataset,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(LabelVector, Array2<f64>, TextClassifier, Diagnostics)> {
    match cfg.method {
        Method::BaselineMajority => {
            let labels = majority_vote(ds, ds.t(), seed);
            let model = train_final(
                ds,
                &labels,
                None,
                &cfg.featurize(),
                &cfg.classifier(seed),
                seed,
            )?;
            Ok((labels, ds.t().to_owned(), model, Diagnostics::None))
        }
        Method::Ulf => {
            let r = run_ulf(ds, &cfg.ulf(seed))?;
            Ok((
                r.final_labels,
                r.refined_t,
                r.model,
                Diagnostics::Ulf(r.diagnostics),
            ))
        }
        Method::Wscw => {
            let r = run_wscw(ds, &cfg.wscw(seed))?;
            Ok((
                r.noisy_labels,
                ds.t().to_owned(),
                r.model,
                Diagnostics::Wscw(r.weights),
            ))
        }
        Method::Wscl => {
            let r = run_wscl(ds, &cfg.wscl(seed))?;
            let d = Diagnostics::Wscl {
                joint: r.joint,
                calibrated: r.calibrated,
                prune: r.prune,
            };
            Ok((r.result.final_labels, r.result.refined_t, r.result.model, d))
        }
    }
}

fn score(model: &TextClassifier, split: &LabeledTexts, metric: Metric, k: usize) -> Result<f64> {
    evaluate(&model.predict(&split.texts), &split.gold, metric, k)
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Runs all repeats in memory.
pub fn execute(cfg: &RunConfig, splits: &Splits) -> Result<RunOutput> {
    if cfg.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    in_pool(cfg.threads, || execute_inner(cfg, splits))?
}

fn execute_inner(cfg: &RunConfig, splits: &Splits) -> Result<RunOutput> {
    let ds = &splits.train;
    let k = ds.num_classes();
    let seeds: Vec<u64> = (0..cfg.repeats).map(|r| repeat_seed(cfg.seed, r)).collect();
    let mut outcomes = Vec::with_capacity(cfg.repeats);
    let mut failures = Vec::new();
    let mut seconds = Vec::with_capacity(cfg.repeats);

    for (r, &s) in seeds.iter().enumerate() {
        let start = Instant::now();
        let attempt = || -> Result<RepeatOutcome> {
            let (labels, refined_t, model, diagnostics) = run_method(ds, cfg, s)?;
            let dev_score = splits
                .dev
                .as_ref()
                .map(|d| score(&model, d, cfg.metric, k))
                .transpose()?;
            let test_score = splits
                .test
                .as_ref()
                .map(|t| score(&model, t, cfg.metric, k))
                .transpose()?;
            Ok(RepeatOutcome {
                seed: s,
                labels,
                refined_t,
                model,
                diagnostics,
                dev_score,
                test_score,
            })
        };
        match attempt() {
            Ok(o) => outcomes.push(Some(o)),
            Err(e) => {
                failures.push(Failure {
                    repeat: r,
                    error: e.to_string(),
                });
                outcomes.push(None);
            }
        }
        seconds.push(start.elapsed().as_secs_f64());
    }

    let ok: Vec<&RepeatOutcome> = outcomes.iter().flatten().collect();
    let collect = |f: &dyn Fn(&RepeatOutcome) -> Option<f64>| {
        summarize(ok.iter().filter_map(|o| f(o)).collect())
    };
    let label_accuracy = ds.gold().and_then(|g| {
        summarize(
            ok.iter()
                .map(|o| evaluate(&o.labels, g, Metric::Accuracy, k).unwrap_or(f64::NAN))
                .collect(),
        )
    });
    let majority_label_accuracy = ds.gold().and_then(|g| {
        summarize(
            ok.iter()
                .map(|o| {
                    let y = majority_vote(ds, ds.t(), o.seed);
                    evaluate(&y, g, Metric::Accuracy, k).unwrap_or(f64::NAN)
                })
                .collect(),
        )
    });

    // best dev score, first repeat on ties; otherwise the last successful repeat
    let mut selected = None;
    let mut best = f64::NEG_INFINITY;
    for (r, o) in outcomes.iter().enumerate() {
        if let Some(o) = o {
            match o.dev_score {
                Some(d) if d > best => {
                    best = d;
                    selected = Some(r);
                }
                Some(_) => {}
                None => selected = Some(r),
            }
        }
    }

    let report = MetricsReport {
        method: cfg.method.to_string(),
        strategy: cfg.strategy.to_string(),
        metric: cfg.metric,
        repeats: cfg.repeats,
        seeds,
        test: collect(&|o| o.test_score),
        dev: collect(&|o| o.dev_score),
        label_accuracy,
        majority_label_accuracy,
        selected_repeat: selected,
        selected_by_dev: splits.dev.is_some(),
        partial: !failures.is_empty(),
        failures,
    };
    Ok(RunOutput {
        report,
        outcomes,
        seconds,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct SeedFile<'a> {
    master: u64,
    repeats: &'a [u64],
}

#[derive(Serialize)]
struct Timing<'a> {
    seconds_per_repeat: &'a [f64],
    total_seconds: f64,
}

#[derive(Serialize)]
struct PruneReport<'a> {
    joint: &'a Array2<usize>,
    calibrated: &'a Array2<f64>,
    pruned_per_cell: &'a Array2<usize>,
    shortfall_per_cell: &'a Array2<usize>,
    pruned_ids: Vec<&'a str>,
}

fn write_diagnostics(dir: &Path, ds: &WeakDataset, d: &Diagnostics) -> Result<()> {
    match d {
        Diagnostics::None => Ok(()),
        Diagnostics::Ulf(iters) => {
            for it in iters {
                write(
                    &dir.join(format!("iteration_{}.json", it.iteration)),
                    &json(it),
                )?;
                corpus::write_t_matrix(
                    &dir.join(format!("t_hat_{}.tsv", it.iteration)),
                    it.t_hat.view(),
                )?;
            }
            Ok(())
        }
        Diagnostics::Wscw(w) => {
            let mut out = String::from("id\tflags\tweight\n");
            for (i, id) in ds.ids().iter().enumerate() {
                let _ = writeln!(out, "{id}\t{}\t{}", w.flags[i], w.w[i]);
            }
            write(&dir.join("weights.tsv"), &out)
        }
        Diagnostics::Wscl {
            joint,
            calibrated,
            prune,
        } => {
            let report = PruneReport {
                joint: &joint.c,
                calibrated,
                pruned_per_cell: &prune.pruned,
                shortfall_per_cell: &prune.shortfall,
                pruned_ids: prune
                    .pruned_ids
                    .iter()
                    .map(|&i| ds.ids()[i].as_str())
                    .collect(),
            };
            write(&dir.join("prune.json"), &json(&report))
        }
    }
}

/// Writes the run directory described in the module docs.
pub fn write_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    splits: &Splits,
    out: &RunOutput,
) -> Result<()> {
    let ds = &splits.train;
    write(&dir.join("config.txt"), &cfg.to_pairs_text())?;
    write(
        &dir.join("seeds.json"),
        &json(&SeedFile {
            master: cfg.seed,
            repeats: &out.report.seeds,
        }),
    )?;
    write(&dir.join("metrics.json"), &json(&out.report))?;
    write(
        &dir.join("timing.json"),
        &json(&Timing {
            seconds_per_repeat: &out.seconds,
            total_seconds: out.seconds.iter().sum(),
        }),
    )?;
    for (r, o) in out.outcomes.iter().enumerate() {
        if let Some(o) = o {
            write_diagnostics(
                &dir.join("diagnostics").join(format!("repeat_{r}")),
                ds,
                &o.diagnostics,
            )?;
        }
    }
    if let Some(o) = out
        .report
        .selected_repeat
        .and_then(|r| out.outcomes[r].as_ref())
    {
        corpus::write_labels(&dir.join("labels_corrected.tsv"), ds.ids(), &o.labels)?;
        corpus::write_t_matrix(&dir.join("t_refined.tsv"), o.refined_t.view())?;
        o.model.save(&dir.join("model"))?;
    }
    Ok(())
}

/// Loads the data, runs every repeat and writes the run directory when one is
/// configured.
pub fn run(cfg: &RunConfig) -> Result<MetricsReport> {
    cfg.validate()?;
    let splits = load_splits(cfg)?;
    let out = execute(cfg, &splits)?;
    if let Some(dir) = &cfg.run_dir {
        write_artifacts(dir, cfg, &splits, &out)?;
    }
    Ok(out.report)
}
