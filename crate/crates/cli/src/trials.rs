//! Randomized batteries over trees and path batches. Every function returns a
//! summary; pass/fail decisions are made by the callers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use sparsedom::paths::{inject_jumps_with, CadlagPath, simulate_brownian_from, subordinate_transform, AmplitudeLaw, JumpSpec, TimeGrid};
use sparsedom::rng::{child_seed, substream, PathRng};
use sparsedom::sparse::{build_sparse_family_y_paths, build_sparse_family_y_tree, sparse_operator_tree, verify_domination, verify_sparsity_binned, verify_sparsity_tree, IncrementLaw, SparsityReport, SparseMode, SparseValue, DEFAULT_THRESHOLD};
use sparsedom::treespace::{martingale_transform, random_tree, vector_transform, TreeProcess, TreeSpace};
use sparsedom::weights::{ap_characteristic_with, verify_doob_weighted, verify_weighted_sparse_l2, ApMethod, WeightProcess};
use sparsedom::zprocess::{build_sparse_family_z_path, weak_type_curve, weak_type_sample, SyntheticModel, WeakTypeCurve};
use sparsedom::Result;

/// A random filtered tree with a martingale `X` and a bounded-multiplier transform `Y`.
pub struct TreeCase {
    pub space: TreeSpace,
    pub x: TreeProcess,
    pub y: TreeProcess,
}

/// Depth uniform in `1..=max_depth`, two or three children per node (two below
/// depth 5 to keep the leaf count moderate).
pub fn random_case(rng: &mut PathRng, max_depth: usize) -> Result<TreeCase> {
    let depth = rng.random_range(1..=max_depth);
    let max_branch = if depth > 4 { 2 } else { 3 };
    let space = random_tree(rng, depth, 2, max_branch)?;
    random_case_on(space, rng)
}

/// Leaf values from one of three laws (independent noise around a shift, a
/// top-down martingale with heavy multiplicative increments, or rare spikes on
/// small-probability leaves); `Y` is a scalar transform with multipliers in
/// `[-1, 1]` or, three times in ten, a transform into the plane.
pub fn random_case_on(space: TreeSpace, rng: &mut PathRng) -> Result<TreeCase> {
    let leaves = match rng.random_range(0..3) {
        0 => {
            let shift = 3.0 * rng.random::<f64>() - 1.0;
            let spread = 0.1 + 2.0 * rng.random::<f64>();
            (0..space.n_leaves())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    shift + spread * z
                })
                .collect()
        }
        1 => top_down_leaves(&space, rng),
        _ => {
            let probs = space.leaf_probs();
            (0..space.n_leaves()).map(|l| if rng.random::<f64>() < 0.2 { 1.0 / probs[l] } else { 0.0 }).collect()
        }
    };
    let x = TreeProcess::martingale_from_leaves(&space, &leaves, 1)?;
    let y = if rng.random::<f64>() < 0.7 {
        let m: Vec<f64> = (0..space.n_nodes()).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        martingale_transform(&space, &x, &m, 2.0 * rng.random::<f64>() - 1.0)?
    } else {
        let d = 2;
        let unit = |rng: &mut PathRng| -> Vec<f64> {
            let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let s = rng.random::<f64>();
            g.iter().map(|v| v / n * s).collect()
        };
        let dirs: Vec<f64> = (0..space.n_nodes()).flat_map(|_| unit(rng)).collect();
        let h0 = unit(rng);
        vector_transform(&space, &x, &dirs, &h0)?
    };
    Ok(TreeCase { space, x, y })
}

/// `X_root = 1`, and each node's children get zero-mean increments of size up to
/// `k (|X_v| + 0.1)` with `k` in `[0.5, 3]`.
fn top_down_leaves(space: &TreeSpace, rng: &mut PathRng) -> Vec<f64> {
    let k = 0.5 + 2.5 * rng.random::<f64>();
    let mut vals = vec![0.0f64; space.n_nodes()];
    vals[0] = 1.0;
    for v in 0..space.n_nodes() {
        let ch = space.children(v);
        if ch.is_empty() {
            continue;
        }
        let g: Vec<f64> = ch.clone().map(|_| StandardNormal.sample(rng)).collect();
        let mean: f64 = ch.clone().zip(&g).map(|(c, gi)| space.transition(c) * gi).sum();
        let size = k * (vals[v].abs() + 0.1);
        for (c, gi) in ch.zip(&g) {
            vals[c] = vals[v] + size * (gi - mean);
        }
    }
    (0..space.n_leaves()).map(|l| vals[space.leaf_node(l)]).collect()
}

/// Log-normal leaf weights with a random log-spread in `[0, 2]`.
pub fn random_weight(rng: &mut PathRng, space: &TreeSpace, p: f64) -> Result<WeightProcess> {
    let s = 2.0 * rng.random::<f64>();
    let lw: Vec<f64> = (0..space.n_leaves())
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            (s * z).exp()
        })
        .collect();
    WeightProcess::from_leaves(space, &lw, p)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatterySummary {
    pub trials: usize,
    pub checked: usize,
    pub violations: usize,
    pub max_ratio: f64,
    /// Trial index of the first violation.
    pub witness: Option<usize>,
}

impl BatterySummary {
    pub fn ok(&self) -> bool {
        self.violations == 0 && self.trials > 0
    }

    fn merge(mut self, i: usize, checked: usize, violated: bool, ratio: f64) -> Self {
        self.trials += 1;
        self.checked += checked;
        if violated {
            self.violations += 1;
            self.witness = Some(self.witness.map_or(i, |w| w.min(i)));
        }
        if ratio > self.max_ratio || ratio.is_nan() {
            self.max_ratio = ratio;
        }
        self
    }
}

fn battery<F>(trials: usize, seed: u64, f: F) -> Result<BatterySummary>
where
    F: Fn(&mut PathRng) -> Result<(usize, bool, f64)> + Sync,
{
    let rows: Vec<Result<(usize, bool, f64)>> = (0..trials).into_par_iter().map(|i| f(&mut substream(seed, i as u64))).collect();
    let mut s = BatterySummary::default();
    for (i, r) in rows.into_iter().enumerate() {
        let (c, v, ratio) = r?;
        s = s.merge(i, c, v, ratio);
    }
    Ok(s)
}

/// Exact `P(A ∩ E_{j+1}) <= P(A)/2` over the atoms of every level; `max_ratio` is
/// the largest atom ratio.
pub fn sparsity_battery(trials: usize, max_depth: usize, seed: u64) -> Result<BatterySummary> {
    battery(trials, seed, |rng| {
        let c = random_case(rng, max_depth)?;
        let fam = build_sparse_family_y_tree(&c.space, &c.x, &c.y, DEFAULT_THRESHOLD)?;
        let rep = verify_sparsity_tree(&c.space, &fam.family)?;
        Ok((rep.atoms_checked, !rep.ok, rep.max_ratio))
    })
}

/// The sparsity check with random processes on one fixed tree.
pub fn sparsity_battery_on(space: &TreeSpace, trials: usize, seed: u64) -> Result<BatterySummary> {
    battery(trials, seed, |rng| {
        let c = random_case_on(space.clone(), rng)?;
        let fam = build_sparse_family_y_tree(&c.space, &c.x, &c.y, DEFAULT_THRESHOLD)?;
        let rep = verify_sparsity_tree(&c.space, &fam.family)?;
        Ok((rep.atoms_checked, !rep.ok, rep.max_ratio))
    })
}

/// Binned sparsity check on a Monte Carlo batch (a statistical screen, not exact).
pub fn sparsity_mc(batch: &PathBatch, bins: usize, seed: u64) -> Result<SparsityReport> {
    let pairs = jump_pairs(batch, seed, 0..batch.paths)?;
    let law = IncrementLaw { variance_rate: 1.0, jump_rate: batch.jump_rate, jump_sd: batch.jump_sd };
    let fam = build_sparse_family_y_paths(&pairs, &law, DEFAULT_THRESHOLD)?;
    Ok(verify_sparsity_binned(&fam.family, bins))
}

fn jump_pairs(batch: &PathBatch, seed: u64, range: std::ops::Range<usize>) -> Result<Vec<(CadlagPath, CadlagPath)>> {
    let grid = TimeGrid::new(batch.t_max, batch.dt)?;
    let spec = JumpSpec { rate: batch.jump_rate, amplitude: AmplitudeLaw::Normal { sd: batch.jump_sd }, subordination_cap: false };
    range
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let x0: f64 = StandardNormal.sample(&mut rng);
            let x = simulate_brownian_from(grid, &[x0], 1.0, &mut rng)?;
            let (x, _) = inject_jumps_with(&x, &spec, &mut rng)?;
            let y = subordinate_transform(&x, &mut rng);
            Ok((x, y))
        })
        .collect()
}

/// `Y* <= constant · S(X)` on every leaf path, with `S` recomputed from the tree's
/// conditional expectations at the stops.
pub fn domination_y_tree_battery(trials: usize, max_depth: usize, constant: f64, seed: u64) -> Result<BatterySummary> {
    battery(trials, seed, |rng| {
        let c = random_case(rng, max_depth)?;
        let fam = build_sparse_family_y_tree(&c.space, &c.x, &c.y, DEFAULT_THRESHOLD)?;
        let s = sparse_operator_tree(&c.space, &c.x, &fam.family, SparseMode::ConditionalExpectation)?;
        let rep = verify_domination(&fam.ystar(), &s, constant)?;
        Ok((c.space.n_leaves(), !rep.ok, rep.worst_ratio))
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathBatch {
    pub paths: usize,
    pub t_max: f64,
    pub dt: f64,
    pub jump_rate: f64,
    pub jump_sd: f64,
    pub chunk: usize,
}

impl Default for PathBatch {
    fn default() -> Self {
        PathBatch { paths: 100_000, t_max: 1.0, dt: 0.01, jump_rate: 3.0, jump_sd: 0.5, chunk: 1000 }
    }
}

/// Brownian `X` with normal jumps and `Y` a transform with fresh multipliers per step.
pub fn domination_y_mc(batch: &PathBatch, constant: f64, seed: u64) -> Result<BatterySummary> {
    let law = IncrementLaw { variance_rate: 1.0, jump_rate: batch.jump_rate, jump_sd: batch.jump_sd };
    let chunks = batch.paths.div_ceil(batch.chunk);
    let mut total = BatterySummary::default();
    for c in 0..chunks {
        let range = c * batch.chunk..((c + 1) * batch.chunk).min(batch.paths);
        let pairs = jump_pairs(batch, seed, range.clone())?;
        let fam = build_sparse_family_y_paths(&pairs, &law, DEFAULT_THRESHOLD)?;
        let ystar: Vec<f64> = fam.traces.iter().map(|t| t.ystar).collect();
        let s = SparseValue::from_scales(&fam.family);
        for (k, i) in range.enumerate() {
            let one = SparseValue { total: vec![s.total[k]], contributions: vec![s.contributions[k].clone()] };
            let rep = verify_domination(&ystar[k..k + 1], &one, constant)?;
            total = total.merge(i, 1, !rep.ok, rep.worst_ratio);
        }
    }
    Ok(total)
}

/// Synthetic submartingale model used by the weak-type and `Z` batteries.
pub fn synthetic_model(batch: &PathBatch, a: f64, jumps: bool) -> Result<SyntheticModel> {
    Ok(SyntheticModel {
        grid: TimeGrid::new(batch.t_max, batch.dt)?,
        a,
        sigma: 1.0,
        x0: 1.0,
        y_dim: 2,
        jump_rate: if jumps { batch.jump_rate } else { 0.0 },
        jump_size: if jumps { 0.5 } else { 0.0 },
    })
}

pub fn weak_type_battery(batch: &PathBatch, a: f64, jumps: bool, lambdas: &[f64], seed: u64) -> Result<WeakTypeCurve> {
    let model = synthetic_model(batch, a, jumps)?;
    let samples = (0..batch.paths)
        .into_par_iter()
        .map(|i| {
            let s = model.sample(&mut substream(seed, i as u64))?;
            weak_type_sample(&s.sub, &s.z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(weak_type_curve(&samples, lambdas))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZDominationSummary {
    pub domination: BatterySummary,
    pub max_telescoping: f64,
    pub telescoping_failures: usize,
}

impl ZDominationSummary {
    pub fn ok(&self, telescoping_tol: f64) -> bool {
        self.domination.ok() && self.max_telescoping <= telescoping_tol
    }
}

/// `Z* <= constant · Σ_n E(X̃ | F_{Tⁿ})` pathwise and the telescoping residual of
/// `Σ_n Z̃ⁿ = Z`.
pub fn domination_z_mc(batch: &PathBatch, a: f64, jumps: bool, constant: f64, telescoping_tol: f64, seed: u64) -> Result<ZDominationSummary> {
    let model = synthetic_model(batch, a, jumps)?;
    let rows = (0..batch.paths)
        .into_par_iter()
        .map(|i| {
            let s = model.sample(&mut substream(seed, i as u64))?;
            let fam = build_sparse_family_z_path(&s.sub, &s.z, &|sk| model.closure_expectation(sk), DEFAULT_THRESHOLD)?;
            let sv: f64 = fam.trace.stops.iter().map(|t| t.scale).sum();
            let zstar = fam.trace.zstar;
            let violated = zstar > constant * sv + 1e-9 * (1.0 + zstar);
            let ratio = if sv > 0.0 { zstar / sv } else { 0.0 };
            Ok((violated, ratio, fam.telescoping_residual))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ZDominationSummary::default();
    for (i, (v, r, t)) in rows.into_iter().enumerate() {
        out.domination = std::mem::take(&mut out.domination).merge(i, 1, v, r);
        out.max_telescoping = out.max_telescoping.max(t);
        out.telescoping_failures += (t > telescoping_tol) as usize;
    }
    Ok(out)
}

/// `‖S(X)‖_{L²(w)} <= 8 Q₂(w) ‖X‖_{L²(w)}` with the family built from `(X, X)`.
pub fn weighted_sparse_battery(trials: usize, max_depth: usize, seed: u64) -> Result<BatterySummary> {
    battery(trials, seed, |rng| {
        let c = random_case(rng, max_depth)?;
        let w = random_weight(rng, &c.space, 2.0)?;
        let rep = verify_weighted_sparse_l2(&c.space, &c.x, &w)?;
        Ok((1, !rep.ok, rep.ratio))
    })
}

pub fn doob_battery(p: f64, trials: usize, max_depth: usize, seed: u64) -> Result<BatterySummary> {
    battery(trials, child_seed(seed, p.to_bits()), |rng| {
        let c = random_case(rng, max_depth)?;
        let w = random_weight(rng, &c.space, p)?;
        let rep = verify_doob_weighted(&c.space, &c.x, &w)?;
        Ok((1, !rep.ok, rep.ratio))
    })
}

/// Node maximum against full enumeration on small trees; `max_ratio` is the largest
/// relative gap and a violation is a gap above 1e-12.
pub fn ap_battery(p: f64, trials: usize, max_depth: usize, seed: u64) -> Result<BatterySummary> {
    battery(trials, child_seed(seed, p.to_bits()), |rng| {
        let depth = rng.random_range(1..=max_depth);
        let space = random_tree(rng, depth, 2, 2)?;
        let w = random_weight(rng, &space, p)?;
        let e = ap_characteristic_with(&space, &w, ApMethod::Enumerate)?;
        let n = ap_characteristic_with(&space, &w, ApMethod::NodeMaximum)?;
        let gap = (e.q - n.q).abs() / e.q;
        Ok((e.examined, gap > 1e-12, gap))
    })
}
