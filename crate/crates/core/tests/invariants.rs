//! Structural invariants under randomized inputs.

use proptest::prelude::*;
use rand::Rng;
use sparsedom::paths::{check_differential_subordination, inject_jumps_with, simulate_brownian_from, subordinate_transform, AmplitudeLaw, JumpSpec, TimeGrid};
use sparsedom::riesz::{bridge_crossing_probability, fft_riesz_oracle};
use sparsedom::rng::substream;
use sparsedom::sparse::{build_sparse_family_y_tree, sparse_operator_tree, verify_domination, verify_sparsity_tree, SparseMode, DEFAULT_THRESHOLD};
use sparsedom::treespace::{martingale_transform, random_tree, sample_stopping_times, TreeProcess, TreeSpace};
use sparsedom::weights::{ap_characteristic_with, ap_over, extrapolate_bound, ApMethod, WeightProcess};
use sparsedom::zprocess::{norm_decay_check, DriftSpec, VSource};

fn tree(seed: u64, depth: usize, max_branch: usize) -> TreeSpace {
    random_tree(&mut substream(seed, 0), depth, 2, max_branch).unwrap()
}

fn weights(seed: u64, space: &TreeSpace, p: f64, spread: f64) -> WeightProcess {
    let mut rng = substream(seed, 1);
    let leaf: Vec<f64> = (0..space.n_leaves()).map(|_| (spread * (rng.random::<f64>() - 0.5)).exp()).collect();
    WeightProcess::from_leaves(space, &leaf, p).unwrap()
}

fn pair(seed: u64, space: &TreeSpace, spike: f64) -> (TreeProcess, TreeProcess) {
    let mut rng = substream(seed, 2);
    let probs = space.leaf_probs();
    let leaves: Vec<f64> = (0..space.n_leaves())
        .map(|i| if rng.random::<f64>() < spike { 1.0 / probs[i] } else { 2.0 * rng.random::<f64>() - 1.0 })
        .collect();
    let x = TreeProcess::martingale_from_leaves(space, &leaves, 1).unwrap();
    let m: Vec<f64> = (0..space.n_nodes()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    let y = martingale_transform(space, &x, &m, m[0]).unwrap();
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn characteristic_is_at_least_one(seed in any::<u64>(), depth in 1usize..=3, p in 1.2f64..4.0, spread in 0.0f64..4.0) {
        let s = tree(seed, depth, if depth > 2 { 2 } else { 3 });
        let w = weights(seed, &s, p, spread);
        let e = ap_characteristic_with(&s, &w, ApMethod::Enumerate).unwrap();
        prop_assert!(e.q >= 1.0 - 1e-12);
        let n = ap_characteristic_with(&s, &w, ApMethod::NodeMaximum).unwrap();
        prop_assert!((e.q - n.q).abs() <= 1e-12 * e.q);
    }

    #[test]
    fn larger_families_never_lower_the_characteristic(seed in any::<u64>(), depth in 2usize..=5, p in 1.2f64..4.0, small in 1usize..20, extra in 1usize..40) {
        let s = tree(seed, depth, 2);
        let w = weights(seed, &s, p, 3.0);
        let few = sample_stopping_times(&s, depth, small, seed);
        let mut more = few.clone();
        more.extend(sample_stopping_times(&s, depth, extra, seed ^ 1));
        let a = ap_over(&s, &w, &few).unwrap().q;
        let b = ap_over(&s, &w, &more).unwrap().q;
        let full = ap_characteristic_with(&s, &w, ApMethod::NodeMaximum).unwrap().q;
        prop_assert!(a <= b && b <= full * (1.0 + 1e-12));
    }

    #[test]
    fn extrapolation_is_monotone(p in 1.05f64..8.0, b1 in 1.0f64..50.0, db in 0.0f64..50.0) {
        let n2 = |a: f64| 8.0 * a;
        let lo = extrapolate_bound(&n2, 2.0, p, b1).unwrap();
        let hi = extrapolate_bound(&n2, 2.0, p, b1 + db).unwrap();
        prop_assert!(lo.is_finite() && lo > 0.0 && lo <= hi);
    }

    #[test]
    fn y_family_is_sparse_and_dominates(seed in any::<u64>(), depth in 1usize..=5, spike in 0.0f64..0.3) {
        let s = tree(seed, depth, if depth > 3 { 2 } else { 3 });
        let (x, y) = pair(seed, &s, spike);
        let fam = build_sparse_family_y_tree(&s, &x, &y, DEFAULT_THRESHOLD).unwrap();
        prop_assert!(fam.family.is_well_formed());
        let rep = verify_sparsity_tree(&s, &fam.family).unwrap();
        prop_assert!(rep.ok, "sparsity ratio {}", rep.max_ratio);
        let sv = sparse_operator_tree(&s, &x, &fam.family, SparseMode::ConditionalExpectation).unwrap();
        let dom = verify_domination(&fam.ystar(), &sv, 8.0).unwrap();
        prop_assert!(dom.ok, "Y*/S {}", dom.worst_ratio);
    }

    #[test]
    fn negative_curvature_never_grows_the_norm(seed in any::<u64>(), dim in 1usize..=4, a in 0.0f64..2.0) {
        let mut rng = substream(seed, 3);
        let g = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.random::<f64>() - 0.5);
        let v = -(&g * g.transpose());
        let drift = DriftSpec::new(a, dim, VSource::Constant(v)).unwrap();
        let z0: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let rep = norm_decay_check(&drift, &z0, TimeGrid::new(1.0, 0.01).unwrap()).unwrap();
        prop_assert!(rep.ok, "increase {}", rep.worst_increase);
    }

    #[test]
    fn transforms_are_subordinate(seed in any::<u64>(), rate in 0.0f64..8.0) {
        let mut rng = substream(seed, 4);
        let grid = TimeGrid::new(1.0, 0.01).unwrap();
        let x = simulate_brownian_from(grid, &[0.5], 1.0, &mut rng).unwrap();
        let spec = JumpSpec { rate, amplitude: AmplitudeLaw::Normal { sd: 0.5 }, subordination_cap: false };
        let (x, _) = inject_jumps_with(&x, &spec, &mut rng).unwrap();
        let y = subordinate_transform(&x, &mut rng);
        prop_assert!(check_differential_subordination(&x, &y, None).unwrap().ok);
    }

    #[test]
    fn bridge_probability_is_a_probability(a in -1.0f64..5.0, b in -1.0f64..5.0, dt in 1e-4f64..1.0) {
        let q = bridge_crossing_probability(a, b, 0.0, dt);
        prop_assert!((0.0..=1.0).contains(&q));
        if a > 0.0 && b > 0.0 {
            prop_assert!((q - (-a * b / dt).exp()).abs() < 1e-15);
        } else {
            prop_assert_eq!(q, 1.0);
        }
    }

    #[test]
    fn oracle_is_linear_and_contractive(seed in any::<u64>(), c in -3.0f64..3.0) {
        let mut rng = substream(seed, 5);
        let f: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let g: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let sum: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a + c * b).collect();
        let (rf, rg, rs) = (fft_riesz_oracle(&f, &[64]).unwrap(), fft_riesz_oracle(&g, &[64]).unwrap(), fft_riesz_oracle(&sum, &[64]).unwrap());
        for i in 0..64 {
            prop_assert!((rs.components[0][i] - rf.components[0][i] - c * rg.components[0][i]).abs() < 1e-12);
        }
        let energy: f64 = rf.components[0].iter().map(|v| v * v).sum();
        let centered: f64 = f.iter().map(|v| (v - rf.removed_mean).powi(2)).sum();
        prop_assert!(energy <= centered * (1.0 + 1e-12));
    }
}
