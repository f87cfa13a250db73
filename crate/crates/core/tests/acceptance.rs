//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! failure status if any criterion fails.
//!
//! Criterion 8 runs only when `ULF_REAL_DATA` names a directory holding
//! `docs.tsv`, `z.tsv`, `t.tsv` and `gold.tsv` (optionally `test_docs.tsv`
//! and `test_gold.tsv`).

mod common;

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{check_oracles, check_plans, gradient_error, random_instance, rng};
use rand::Rng;

use ulf::corpus::{dataset_stats, majority_vote, LabelVector, WeakDataset};
use ulf::crossval::{Strategy, TfidfLogistic};
use ulf::featurize::FeaturizeConfig;
use ulf::harness::{self, Method, RunConfig, SynthJob};
use ulf::linear::ClassifierConfig;
use ulf::synth::{generate, inject_flips, SynthConfig};
use ulf::ulf::{calibrate, lf_confident_matrix, refine_t, run_ulf, UlfConfig};
use ulf::wscl::{run_wscl_with, WsclConfig};
use ulf::wscw::{run_wscw_with, WscwConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let e = start.elapsed();
    (
        e < limit,
        format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()),
    )
}

fn accuracy(pred: &[usize], gold: &[usize]) -> f64 {
    pred.iter().zip(gold).filter(|(a, b)| a == b).count() as f64 / pred.len() as f64
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    for _ in 0..200 {
        let (s, n, l, k) = (
            r.random(),
            r.random_range(1..=50),
            r.random_range(1..=8),
            r.random_range(2..=4),
        );
        if let Err(e) = check_oracles(s, n, l, k) {
            return outcome(false, e);
        }
    }
    let (fast, t) = within(start, Duration::from_secs(30));
    outcome(fast, format!("200 instances agree, {t}"))
}

fn calibration_invariant() -> Outcome {
    let mut r = rng(2);
    for case in 0..200 {
        let (n, l, k) = (
            r.random_range(1..=50),
            r.random_range(1..=8),
            r.random_range(2..=4),
        );
        let inst = random_instance(&mut r, n, l, k, 0.3);
        let conf = common::random_conf(&mut r, n, k);
        let q = calibrate(&lf_confident_matrix(&inst.ds, &conf), &inst.ds);
        let matches = inst.ds.lf_match_counts();
        for (lf, &m) in matches.iter().enumerate() {
            if q.informative[lf] && (q.q.row(lf).sum() - m as f64).abs() > 1e-9 {
                return outcome(false, format!("case {case}: LF {lf} total not preserved"));
            }
        }
        let p = r.random_range(0.0..=1.0);
        if refine_t(inst.ds.t(), &q, p)
            .rows()
            .into_iter()
            .any(|row| (row.sum() - 1.0).abs() > 1e-9)
        {
            return outcome(false, format!("case {case}: refined row does not sum to 1"));
        }
        if refine_t(inst.ds.t(), &q, 0.0) != inst.t {
            return outcome(false, format!("case {case}: p=0 changed T"));
        }
    }
    outcome(
        true,
        "200 instances: totals kept, rows stochastic, p=0 identity".into(),
    )
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let l2 = [0.0, 0.01, 0.1, 0.5][r.random_range(0..4)];
        let e = gradient_error(
            r.random(),
            r.random_range(1..=12),
            r.random_range(1..=8),
            r.random_range(2..=4),
            l2,
        );
        worst = worst.max(e);
    }
    let (fast, t) = within(start, Duration::from_secs(10));
    outcome(
        worst < 1e-4 && fast,
        format!("max relative error {worst:.2e}, {t}"),
    )
}

fn fold_plans() -> Outcome {
    let mut r = rng(4);
    for _ in 0..100 {
        let lambda = [0.0, 0.5, 2.0][r.random_range(0..3)];
        let res = check_plans(
            r.random(),
            r.random_range(10..=100),
            r.random_range(3..=10),
            r.random_range(2..=5),
            lambda,
        );
        if let Err(e) = res {
            return outcome(false, e);
        }
    }
    outcome(
        true,
        "100 random Z: LF-disjoint, signature partition, all predicted".into(),
    )
}

fn benchmark(seed: u64) -> SynthConfig {
    SynthConfig {
        misallocated_lfs: vec![(9, 0)],
        seed,
        ..SynthConfig::uniform(2000, 2, 10, 0.9, 0.87)
    }
}

fn ulf_improvement() -> Outcome {
    let start = Instant::now();
    let mut gains = Vec::new();
    let (mut mv_sum, mut ulf_sum) = (0.0, 0.0);
    for s in 0..10 {
        let (ds, gold) = generate(&benchmark(s)).unwrap();
        let mv = accuracy(&majority_vote(&ds, ds.t(), s), &gold);
        let cfg = UlfConfig {
            p: 0.5,
            k: 5,
            strategy: Strategy::BySignature,
            lambda_rate: 0.0,
            max_iters: 5,
            seed: s,
            ..UlfConfig::default()
        };
        let res = match run_ulf(&ds, &cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("seed {s}: {e}")),
        };
        let acc = accuracy(&res.final_labels, &gold);
        mv_sum += mv;
        ulf_sum += acc;
        gains.push(acc - mv);
    }
    let wins = gains.iter().filter(|&&g| g > 0.0).count();
    let gap = (ulf_sum - mv_sum) / 10.0;
    let (fast, t) = within(start, Duration::from_secs(300));
    outcome(
        gap >= 0.05 && wins >= 8 && fast,
        format!(
            "majority {:.2}%, ULF {:.2}%, gain {:.2} points, wins {wins}/10, {t}",
            mv_sum * 10.0,
            ulf_sum * 10.0,
            gap * 100.0
        ),
    )
}

fn ulf_identity() -> Outcome {
    for (s, cov) in [(0, 0.87), (1, 0.5), (2, 0.25)] {
        let mut cfg = SynthConfig::uniform(400, 3, 9, 0.8, cov);
        cfg.seed = s;
        let (ds, _) = generate(&cfg).unwrap();
        let ucfg = UlfConfig {
            p: 0.0,
            lambda_rate: 0.0,
            max_iters: 1,
            seed: 11 + s,
            ..UlfConfig::default()
        };
        let res = run_ulf(&ds, &ucfg).unwrap();
        if res.final_labels != majority_vote(&ds, ds.t(), 11 + s) {
            return outcome(
                false,
                format!("coverage {cov}: labels differ from majority vote"),
            );
        }
    }
    outcome(
        true,
        "p=0, lambda=0, I=1 reproduces majority vote on 3 datasets".into(),
    )
}

fn precision(flags: &[bool], truth: &[bool]) -> f64 {
    let flagged = flags.iter().filter(|&&f| f).count();
    if flagged == 0 {
        return 0.0;
    }
    let hit = flags.iter().zip(truth).filter(|(f, t)| **f && **t).count();
    hit as f64 / flagged as f64
}

fn sanity_dataset(seed: u64) -> (WeakDataset, LabelVector) {
    let mut cfg = SynthConfig::uniform(1000, 2, 10, 1.0, 0.9);
    cfg.seed = seed;
    let (ds, _) = generate(&cfg).unwrap();
    let noisy = majority_vote(&ds, ds.t(), seed);
    (ds, noisy)
}

/// Plain SGD needs more epochs than the default to converge on the
/// class-imbalanced training sets that LF folds produce.
fn faithful() -> ClassifierConfig {
    ClassifierConfig {
        epochs: 100,
        ..ClassifierConfig::default()
    }
}

fn wscw_cfg(seed: u64) -> WscwConfig {
    WscwConfig {
        seed,
        classifier: faithful(),
        ..WscwConfig::default()
    }
}

fn wscl_cfg(seed: u64) -> WsclConfig {
    WsclConfig {
        seed,
        classifier: faithful(),
        ..WsclConfig::default()
    }
}

fn wscw_wscl_sanity() -> Outcome {
    let learner = TfidfLogistic {
        featurize: FeaturizeConfig::default(),
        classifier: faithful(),
    };
    let base_rate = 0.2;
    let (mut cw_ok, mut cl_ok) = (0, 0);
    let (mut cw_prec, mut cl_prec) = (0.0, 0.0);
    for s in 0..10 {
        let (ds, clean) = sanity_dataset(s);
        let eligible: Vec<bool> = (0..ds.len()).map(|i| ds.is_matched(i)).collect();
        let (noisy, flipped) = inject_flips(&clean, 2, base_rate, &eligible, s);
        let cw = run_wscw_with(&ds, noisy.clone(), &wscw_cfg(s), &learner).unwrap();
        let flagged: Vec<bool> = cw.weights.flags.iter().map(|&c| c > 0).collect();
        let p = precision(&flagged, &flipped);
        cw_prec += p / 10.0;
        cw_ok += usize::from(p >= 2.0 * base_rate);

        let cl = run_wscl_with(&ds, noisy, &wscl_cfg(s), &learner).unwrap();
        let pruned: Vec<bool> = cl.prune.keep.iter().map(|&k| !k).collect();
        let p = precision(&pruned, &flipped);
        cl_prec += p / 10.0;
        cl_ok += usize::from(p >= 2.0 * base_rate);
    }

    let mut worst_pruned: f64 = 0.0;
    let mut worst_kept: f64 = 1.0;
    for s in 100..103 {
        let (ds, clean) = sanity_dataset(s);
        let cl = run_wscl_with(&ds, clean.clone(), &wscl_cfg(s), &learner).unwrap();
        worst_pruned = worst_pruned.max(cl.prune.num_pruned() as f64 / ds.len() as f64);
        let cw = run_wscw_with(&ds, clean, &wscw_cfg(s), &learner).unwrap();
        let ones = cw.weights.w.iter().filter(|&&w| w == 1.0).count() as f64 / ds.len() as f64;
        worst_kept = worst_kept.min(ones);
    }
    outcome(
        cw_ok >= 8 && cl_ok >= 8 && worst_pruned <= 0.02 && worst_kept >= 0.95,
        format!(
            "flip precision WSCW {:.2} ({cw_ok}/10), WSCL {:.2} ({cl_ok}/10); clean: pruned <= {:.1}%, weights at 1.0 >= {:.1}%",
            cw_prec,
            cl_prec,
            worst_pruned * 100.0,
            worst_kept * 100.0
        ),
    )
}

fn real_data() -> Outcome {
    let Some(dir) = std::env::var_os("ULF_REAL_DATA") else {
        return outcome(true, "skipped: ULF_REAL_DATA not set".into());
    };
    let dir = Path::new(&dir);
    let mut cfg = RunConfig::default();
    cfg.set("data", &dir.display().to_string()).unwrap();
    let splits = match harness::load_splits(&cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("cannot load {}: {e}", dir.display())),
    };
    let stats = dataset_stats(&splits.train, 10, 0);
    let Some(mv) = stats.majority_accuracy else {
        return outcome(false, "gold.tsv is required".into());
    };
    let cov_ok = (stats.coverage - 0.87).abs() <= 0.03;
    let mv_ok = (mv.mean - 0.82).abs() <= 0.03;

    // hyperparameters selected for this dataset in the original grid
    for (k, v) in [
        ("p", "0.5"),
        ("lr", "0.01"),
        ("k", "8"),
        ("max_iters", "5"),
        ("lambda", "0"),
        ("repeats", "3"),
    ] {
        cfg.set(k, v).unwrap();
    }
    let mut scores = Vec::new();
    for m in [Method::BaselineMajority, Method::Ulf] {
        cfg.method = m;
        let out = match harness::execute(&cfg, &splits) {
            Ok(o) => o,
            Err(e) => return outcome(false, format!("{m}: {e}")),
        };
        let summary = out.report.test.or(out.report.label_accuracy);
        scores.push(summary.map_or(f64::NAN, |s| s.mean));
    }
    outcome(
        cov_ok && mv_ok && scores[1] > scores[0],
        format!(
            "coverage {:.1}%, majority accuracy {:.1}%, baseline {:.3} vs ULF {:.3}",
            stats.coverage * 100.0,
            mv.mean * 100.0,
            scores[0],
            scores[1]
        ),
    )
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let mut job = SynthJob::default();
    for (k, v) in [
        ("n_samples", "600"),
        ("n_lfs", "8"),
        ("lf_precision", "0.85"),
        ("coverage_target", "0.7"),
        ("misallocated_lfs", "3:0"),
        ("dev_samples", "200"),
        ("test_samples", "200"),
        ("seed", "5"),
    ] {
        job.set(k, v).unwrap();
    }
    job.set("out", &data.display().to_string()).unwrap();
    harness::write_synth(&job.finish().unwrap()).unwrap();

    let files = ["metrics.json", "labels_corrected.tsv", "t_refined.tsv"];
    for method in ["baseline_majority", "ulf", "wscw", "wscl"] {
        let mut outputs = Vec::new();
        for (run, threads) in [1, 4, 4].into_iter().enumerate() {
            let mut cfg = RunConfig::default();
            cfg.set("data", &data.display().to_string()).unwrap();
            for (k, v) in [
                ("method", method),
                ("repeats", "2"),
                ("max_iters", "3"),
                ("lambda", "1"),
                ("seed", "9"),
            ] {
                cfg.set(k, v).unwrap();
            }
            cfg.threads = threads;
            let dir = tmp.path().join(format!("{method}_{run}"));
            cfg.run_dir = Some(dir.clone());
            if let Err(e) = harness::run(&cfg) {
                return outcome(false, format!("{method}: {e}"));
            }
            outputs.push(files.map(|f| std::fs::read(dir.join(f)).unwrap()));
        }
        if outputs.iter().any(|o| o != &outputs[0]) {
            return outcome(false, format!("{method}: outputs differ between runs"));
        }
    }
    outcome(
        true,
        "4 methods x 3 runs (1 and 4 threads) byte-identical".into(),
    )
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("calibration invariant", calibration_invariant),
        ("gradient check", gradient_check),
        ("fold-plan properties", fold_plans),
        ("end-to-end ULF improvement", ulf_improvement),
        ("ULF identity configuration", ulf_identity),
        ("WSCW/WSCL sanity", wscw_wscl_sanity),
        ("optional real-data check", real_data),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
