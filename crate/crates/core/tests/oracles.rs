//! Brute-force recomputations of the counting and voting primitives.

mod common;

use common::{check_oracles, rng};
use proptest::prelude::*;
use rand::Rng;

use ulf::harness::{evaluate, Metric};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn primitives_match_brute_force(s in any::<u64>(), n in 1usize..50, l in 1usize..8, k in 2usize..5) {
        let r = check_oracles(s, n, l, k);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }

    #[test]
    fn evaluate_matches_confusion_counts(s in any::<u64>(), n in 1usize..100, k in 2usize..5) {
        let mut r = rng(s);
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let gold: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let acc = (0..n).filter(|&i| pred[i] == gold[i]).count() as f64 / n as f64;
        prop_assert_eq!(evaluate(&pred, &gold, Metric::Accuracy, k).unwrap(), acc);

        let f1 = |c: usize| {
            let tp = (0..n).filter(|&i| pred[i] == c && gold[i] == c).count() as f64;
            let fp = (0..n).filter(|&i| pred[i] == c && gold[i] != c).count() as f64;
            let fn_ = (0..n).filter(|&i| pred[i] != c && gold[i] == c).count() as f64;
            let seen = tp + fp + fn_ > 0.0;
            (if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) }, seen)
        };
        let present: Vec<f64> = (0..k).map(f1).filter(|x| x.1).map(|x| x.0).collect();
        let macro_f1 = present.iter().sum::<f64>() / present.len() as f64;
        prop_assert!((evaluate(&pred, &gold, Metric::MacroF1, k).unwrap() - macro_f1).abs() < 1e-12);
        if k == 2 {
            prop_assert!((evaluate(&pred, &gold, Metric::BinaryF1, 2).unwrap() - f1(1).0).abs() < 1e-12);
        }
    }
}
