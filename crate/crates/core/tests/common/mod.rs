#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ulf::confidence::{class_thresholds, confident_labels, ConfidentLabels};
use ulf::corpus::{majority_vote, one_hot_t, Signature, WeakDataset};
use ulf::crossval::{
    estimate_oos, plan_by_lf, plan_by_signature, FoldPlan, OOSProbs, UniformLearner,
};
use ulf::featurize::SparseMatrix;
use ulf::linear::objective;
use ulf::seed;
use ulf::ulf::lf_confident_matrix;
use ulf::wscl::class_confident_joint;

/// Random weak dataset with dense match matrix `z` returned alongside.
pub struct Instance {
    pub ds: WeakDataset,
    pub z: Vec<Vec<bool>>,
    pub t: Array2<f64>,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_instance(r: &mut ChaCha8Rng, n: usize, l: usize, k: usize, density: f64) -> Instance {
    let z: Vec<Vec<bool>> = (0..n)
        .map(|_| (0..l).map(|_| r.random_bool(density)).collect())
        .collect();
    let assignment: Vec<usize> = (0..l).map(|_| r.random_range(0..k)).collect();
    let t = one_hot_t(&assignment, k);
    let sigs = z
        .iter()
        .map(|row| Signature::new((0..l).filter(|&j| row[j]).collect()))
        .collect();
    let texts = (0..n)
        .map(|_| {
            (0..5)
                .map(|_| format!("w{}", r.random_range(0..30)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    let gold = (0..n).map(|_| r.random_range(0..k)).collect();
    let ds = WeakDataset::new(
        (0..n).map(|i| format!("d{i}")).collect(),
        texts,
        sigs,
        l,
        t.clone(),
        Some(gold),
    )
    .unwrap();
    Instance { ds, z, t }
}

/// Random row-stochastic probabilities; some rows left undefined when
/// `holes` is set.
pub fn random_probs(r: &mut ChaCha8Rng, n: usize, k: usize, holes: bool) -> OOSProbs {
    let mut probs = Array2::zeros((n, k));
    let mut count = vec![1; n];
    for i in 0..n {
        if holes && r.random_bool(0.1) {
            count[i] = 0;
            continue;
        }
        // coarse values so exact ties occur
        let raw: Vec<f64> = (0..k).map(|_| r.random_range(1..5) as f64).collect();
        let s: f64 = raw.iter().sum();
        for j in 0..k {
            probs[[i, j]] = raw[j] / s;
        }
    }
    OOSProbs {
        probs,
        prediction_count: count,
    }
}

pub type Check = Result<(), String>;

pub fn brute_vote(z: &[Vec<bool>], t: &Array2<f64>, seed: u64) -> Vec<usize> {
    let k = t.ncols();
    z.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = seed::stream(seed, "tie", i as u64);
            if !row.iter().any(|&h| h) {
                return r.random_range(0..k);
            }
            let mut scores = vec![0.0; k];
            for (l, &hit) in row.iter().enumerate() {
                if hit {
                    for j in 0..k {
                        scores[j] += t[[l, j]];
                    }
                }
            }
            let mut tied = Vec::new();
            let mut best = f64::NEG_INFINITY;
            for (j, &s) in scores.iter().enumerate() {
                if s > best {
                    best = s;
                    tied = vec![j];
                } else if s == best {
                    tied.push(j);
                }
            }
            if tied.len() == 1 {
                tied[0]
            } else {
                tied[r.random_range(0..tied.len())]
            }
        })
        .collect()
}

pub fn random_conf(r: &mut ChaCha8Rng, n: usize, k: usize) -> ConfidentLabels {
    ConfidentLabels {
        labels: (0..n)
            .map(|_| {
                if r.random_bool(0.3) {
                    None
                } else {
                    Some(r.random_range(0..k))
                }
            })
            .collect(),
    }
}

/// Majority vote, LF-confident counts, class joint, thresholds and
/// confident labels against nested-loop recomputation on one instance.
pub fn check_oracles(s: u64, n: usize, l: usize, k: usize) -> Check {
    let mut r = rng(s);
    let inst = random_instance(&mut r, n, l, k, 0.3);

    let vote_seed = r.random::<u64>();
    let y = majority_vote(&inst.ds, inst.ds.t(), vote_seed);
    if y.labels != brute_vote(&inst.z, &inst.t, vote_seed) {
        return Err(format!("majority_vote differs (instance {s})"));
    }

    let conf = random_conf(&mut r, n, k);
    let c = lf_confident_matrix(&inst.ds, &conf);
    for lf in 0..l {
        for j in 0..k {
            let count = (0..n)
                .filter(|&i| inst.z[i][lf] && conf.labels[i] == Some(j))
                .count();
            if c.c[[lf, j]] != count {
                return Err(format!(
                    "lf_confident_matrix[{lf}][{j}] differs (instance {s})"
                ));
            }
        }
    }

    let noisy: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let joint = class_confident_joint(&noisy, &conf, k);
    for a in 0..k {
        for b in 0..k {
            let count = (0..n)
                .filter(|&i| noisy[i] == a && conf.labels[i] == Some(b))
                .count();
            if joint.c[[a, b]] != count {
                return Err(format!(
                    "class_confident_joint[{a}][{b}] differs (instance {s})"
                ));
            }
        }
    }

    let probs = random_probs(&mut r, n, k, true);
    let th = class_thresholds(&probs, &noisy);
    for j in 0..k {
        let vals: Vec<f64> = (0..n)
            .filter(|&i| noisy[i] == j && probs.prediction_count[i] > 0)
            .map(|i| probs.probs[[i, j]])
            .collect();
        let expect = if vals.is_empty() {
            1.0 / k as f64
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        if (th.t[j] - expect).abs() > 1e-12 {
            return Err(format!(
                "class_thresholds[{j}] {} vs {expect} (instance {s})",
                th.t[j]
            ));
        }
    }
    let cl = confident_labels(&probs, &th);
    for i in 0..n {
        let expect = if probs.prediction_count[i] == 0 {
            None
        } else {
            let mut best: Option<usize> = None;
            for j in 0..k {
                let p = probs.probs[[i, j]];
                if p >= th.t[j] && best.is_none_or(|b| p > probs.probs[[i, b]]) {
                    best = Some(j);
                }
            }
            best
        };
        if cl.labels[i] != expect {
            return Err(format!(
                "confident label of sample {i} differs (instance {s})"
            ));
        }
    }
    Ok(())
}

/// Largest relative error between analytic and central-difference gradients.
pub fn gradient_error(s: u64, n: usize, v: usize, k: usize, l2: f64) -> f64 {
    let mut r = rng(s);
    let dense: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..v)
                .map(|_| {
                    if r.random_bool(0.5) {
                        r.random_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let x = SparseMatrix::from_dense(&dense);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let w: Vec<f64> = (0..n).map(|_| r.random_range(0.1..2.0)).collect();
    let weights = Array2::from_shape_fn((v, k), |_| r.random_range(-1.0..1.0));
    let bias: Vec<f64> = (0..k).map(|_| r.random_range(-1.0..1.0)).collect();
    let obj = objective(weights.view(), &bias, &x, &labels, Some(&w), l2);
    let f = |wt: &Array2<f64>, b: &[f64]| objective(wt.view(), b, &x, &labels, Some(&w), l2).loss;
    let h = 1e-6;
    let rel = |an: f64, fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(1e-3);
    let mut worst: f64 = 0.0;
    for a in 0..v {
        for c in 0..k {
            let (mut up, mut dn) = (weights.clone(), weights.clone());
            up[[a, c]] += h;
            dn[[a, c]] -= h;
            let fd = (f(&up, &bias) - f(&dn, &bias)) / (2.0 * h);
            worst = worst.max(rel(obj.grad_weights[[a, c]], fd));
        }
    }
    for c in 0..k {
        let (mut up, mut dn) = (bias.clone(), bias.clone());
        up[c] += h;
        dn[c] -= h;
        let fd = (f(&weights, &up) - f(&weights, &dn)) / (2.0 * h);
        worst = worst.max(rel(obj.grad_bias[c], fd));
    }
    worst
}

fn check_predicted(inst: &Instance, plan: &FoldPlan, what: &str) -> Check {
    let y = majority_vote(&inst.ds, inst.ds.t(), 0);
    let oos = estimate_oos(&inst.ds, &y, plan, &UniformLearner).map_err(|e| e.to_string())?;
    match oos.prediction_count.iter().position(|&c| c == 0) {
        Some(i) => Err(format!("{what}: sample {i} never predicted")),
        None => Ok(()),
    }
}

/// LF-disjointness of by-LF folds and the partition property of by-signature
/// folds. Instances whose plan is infeasible count as vacuous.
pub fn check_plans(s: u64, n: usize, l: usize, k: usize, lambda: f64) -> Check {
    let mut r = rng(s);
    let inst = random_instance(&mut r, n, l, 2, 0.25);
    if let Ok(plan) = plan_by_lf(&inst.ds, k.min(l), lambda, s) {
        let groups = plan.lf_folds.as_ref().unwrap();
        for (f, (fold, group)) in plan.folds.iter().zip(groups).enumerate() {
            if fold
                .train
                .iter()
                .any(|&i| group.iter().any(|&lf| inst.z[i][lf]))
            {
                return Err(format!(
                    "by_lf fold {f} trains on an LF it tests (instance {s})"
                ));
            }
        }
        check_predicted(&inst, &plan, "by_lf")?;
    }
    if let Ok(plan) = plan_by_signature(&inst.ds, k, lambda, s) {
        let mut home = vec![usize::MAX; n];
        for (f, fold) in plan.folds.iter().enumerate() {
            for &i in &fold.test {
                if home[i] != usize::MAX {
                    return Err(format!(
                        "by_signature tests sample {i} twice (instance {s})"
                    ));
                }
                home[i] = f;
            }
        }
        for i in inst.ds.matched() {
            if home[i] == usize::MAX {
                return Err(format!(
                    "by_signature never tests sample {i} (instance {s})"
                ));
            }
            for j in inst.ds.matched() {
                if inst.ds.signature(i) == inst.ds.signature(j) && home[i] != home[j] {
                    return Err(format!("signature split across folds (instance {s})"));
                }
            }
        }
        check_predicted(&inst, &plan, "by_signature")?;
    }
    Ok(())
}
