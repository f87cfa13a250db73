//! WSCW and WSCL against stub learners with known predictions.

use ulf::corpus::majority_vote;
use ulf::crossval::EchoLearner;
use ulf::linear::ClassifierConfig;
use ulf::synth::{generate, inject_flips, SynthConfig};
use ulf::ulf::train_final;
use ulf::wscl::{run_wscl_with, WsclConfig};
use ulf::wscw::{run_wscw_with, WscwConfig};

fn data() -> (ulf::corpus::WeakDataset, ulf::corpus::LabelVector) {
    let mut cfg = SynthConfig::uniform(200, 2, 6, 1.0, 0.8);
    cfg.seed = 11;
    let (ds, _) = generate(&cfg).unwrap();
    let y = majority_vote(&ds, ds.t(), 11);
    (ds, y)
}

fn matched(ds: &ulf::corpus::WeakDataset) -> Vec<bool> {
    let mut m = vec![false; ds.len()];
    for i in ds.matched() {
        m[i] = true;
    }
    m
}

fn quick() -> ClassifierConfig {
    ClassifierConfig {
        epochs: 5,
        ..ClassifierConfig::default()
    }
}

#[test]
fn wscw_with_agreeing_learner_keeps_unit_weights() {
    let (ds, y) = data();
    let echo = EchoLearner {
        labels: y.labels.clone(),
    };
    let cfg = WscwConfig {
        classifier: quick(),
        ..WscwConfig::default()
    };
    let r = run_wscw_with(&ds, y, &cfg, &echo).unwrap();
    assert!(r.weights.w.iter().all(|&w| w == 1.0));
    assert!(r.weights.flagged().is_empty());
}

#[test]
fn wscw_at_epsilon_one_equals_unweighted_training() {
    let (ds, y) = data();
    let (flipped, _) = inject_flips(&y, 2, 0.3, &matched(&ds), 5);
    let echo = EchoLearner { labels: y.labels };
    let cfg = WscwConfig {
        epsilon: 1.0,
        classifier: quick(),
        ..WscwConfig::default()
    };
    let r = run_wscw_with(&ds, flipped.clone(), &cfg, &echo).unwrap();
    assert!(!r.weights.flagged().is_empty());
    let plain = train_final(
        &ds,
        &flipped,
        None,
        &cfg.featurize,
        &cfg.classifier,
        cfg.seed,
    )
    .unwrap();
    assert_eq!(r.model, plain);
}

#[test]
fn wscw_flags_exactly_the_flips_under_a_gold_echo() {
    let (ds, y) = data();
    let (flipped, is_flip) = inject_flips(&y, 2, 0.2, &matched(&ds), 9);
    let echo = EchoLearner { labels: y.labels };
    let cfg = WscwConfig {
        classifier: quick(),
        ..WscwConfig::default()
    };
    let r = run_wscw_with(&ds, flipped, &cfg, &echo).unwrap();
    for (i, &f) in is_flip.iter().enumerate() {
        let flips = if f { cfg.partitions } else { 0 };
        assert_eq!(r.weights.flags[i], flips, "sample {i}");
    }
}

#[test]
fn wscl_with_agreeing_learner_prunes_nothing() {
    let (ds, y) = data();
    let echo = EchoLearner {
        labels: y.labels.clone(),
    };
    let cfg = WsclConfig {
        classifier: quick(),
        ..WsclConfig::default()
    };
    let r = run_wscl_with(&ds, y.clone(), &cfg, &echo).unwrap();
    assert_eq!(r.prune.num_pruned(), 0);
    assert_eq!(r.result.final_labels, y);
}
