//! Values computed once by the independent Python oracle in `tools/oracles` and frozen
//! in `frozen.json`.

use serde_json::Value;
use sparsedom::riesz::estimator::normal_quantile;
use sparsedom::riesz::{bin_targets, Bins, Geometry, TestFunction};
use sparsedom::treespace::{build_tree, count_stopping_times, enumerate_stopping_times, uniform_tree};
use sparsedom::weights::{ap_characteristic, doob_constant, extrapolate_bound, weighted_norm, WeightProcess};

fn frozen() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../tools/oracles/frozen.json");
    serde_json::from_str(&std::fs::read_to_string(path).expect("frozen oracle file")).expect("valid json")
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing {key}"))
}

fn list(v: &Value, key: &str) -> Vec<f64> {
    v[key].as_array().unwrap_or_else(|| panic!("missing {key}")).iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{a} vs {b} (tol {tol})");
}

#[test]
fn skewed_tree_leaf_probabilities() {
    let v = frozen();
    let t = build_tree(2, &[2, 2], &[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap();
    for (a, b) in t.leaf_probs().iter().zip(list(&v, "leaf_probs_depth2")) {
        close(*a, b, 1e-15);
    }
}

#[test]
fn binary_stopping_time_counts() {
    let v = frozen();
    for (depth, key) in [(1, "stopping_times_depth1"), (2, "stopping_times_depth2"), (3, "stopping_times_depth3")] {
        let t = uniform_tree(depth, 2).unwrap();
        let want = num(&v, key);
        assert_eq!(count_stopping_times(&t, depth), want, "depth {depth}");
        assert_eq!(enumerate_stopping_times(&t, depth).unwrap().len() as f64, want, "depth {depth}");
    }
}

#[test]
fn fair_coin_weight() {
    let v = frozen();
    let coin = build_tree(1, &[2], &[vec![0.5, 0.5]]).unwrap();
    let w = WeightProcess::from_leaves(&coin, &[2.0, 0.5], 2.0).unwrap();
    let (n, d) = v["q2_fair_coin"].as_str().unwrap().split_once('/').unwrap();
    let q2 = n.parse::<f64>().unwrap() / d.parse::<f64>().unwrap();
    close(ap_characteristic(&coin, &w).unwrap().q, q2, 1e-14);
    close(weighted_norm(&coin, &[1.0, 3.0], 1, &[2.0, 0.5], 2.0).unwrap(), num(&v, "weighted_norm_fair_coin"), 1e-15);
}

#[test]
fn doob_constants() {
    let v = frozen();
    for (p, key) in [(1.5, "doob_1.5"), (2.0, "doob_2"), (3.0, "doob_3")] {
        close(doob_constant(p).unwrap(), num(&v, key), 1e-14);
    }
}

#[test]
fn extrapolated_bounds() {
    let v = frozen();
    let n2 = |a: f64| 8.0 * a;
    for (p, b, key) in [(4.0, 1.0, "extrap_r2_p4_b1"), (3.0, 1.0, "extrap_r2_p3_b1"), (1.5, 1.0, "extrap_r2_p1.5_b1"), (1.5, 2.0, "extrap_r2_p1.5_b2")] {
        close(extrapolate_bound(&n2, 2.0, p, b).unwrap(), num(&v, key), 1e-12);
    }
}

#[test]
fn gaussian_quantile() {
    close(normal_quantile(0.975), num(&frozen(), "normal_quantile_0.975"), 1e-13);
}

#[test]
fn riesz_bin_targets() {
    let v = frozen();
    let gauss = Geometry::gauss(1).unwrap();
    let bins = Bins::for_geometry(&gauss, 64).unwrap();
    let got = bin_targets(&gauss, &TestFunction::hermite(1, 2), &bins).unwrap();
    for (a, b) in got.iter().zip(list(&v, "gauss_he2_targets_64")) {
        close(*a, b, 1e-9);
    }
    let torus = Geometry::torus(1).unwrap();
    let bins = Bins::for_geometry(&torus, 64).unwrap();
    let got = bin_targets(&torus, &TestFunction::cos(1, 1), &bins).unwrap();
    for (a, b) in got.iter().zip(list(&v, "torus_cos_targets_64")) {
        close(*a, b, 1e-5);
    }
}
