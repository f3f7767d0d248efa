//! Sparse stopping families for a subordinate pair `(X, Y)`, sparse operators and
//! the sparsity and domination checks, on trees and on path batches.
//!
//! Both engines reduce to discrete sequences: a root-to-leaf path of a tree, or the
//! skeleton of a càdlàg path in which left limits are separate points. Every step of
//! such a sequence is treated as a jump, so the re-foot operator is the contraction
//! `r = ΔY ⊗ ΔX / |ΔX|²` of the crossing step.

use crate::error::{Error, Result};
use crate::paths::{CadlagPath, Skeleton};
use crate::treespace::{norm, TreeProcess, TreeSpace};

pub const DEFAULT_LEVEL_BUDGET: usize = 200;
pub const DEFAULT_THRESHOLD: f64 = 4.0;
pub const MC_BINS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    YConstruction,
    ZConstruction,
}

/// One finite stopping time of a path. On trees `step` is the depth; on skeletons it
/// is the point index, and `fraction` in `(0, 1]` locates a stop inside the step
/// ending at `step` (1 means exactly at the point).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stop {
    pub step: usize,
    pub fraction: f64,
    /// The level scale: `E(|X| | F_T)` for `Y`-families, `E(X̃ | F_T)` for `Z`-families.
    pub scale: f64,
}

impl Stop {
    pub fn position(&self) -> f64 {
        if self.step == 0 {
            0.0
        } else {
            self.step as f64 - 1.0 + self.fraction
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingFamily {
    pub provenance: Provenance,
    /// Finite stops per path; `T^j = ∞` for every `j >= stops[path].len()`.
    pub stops: Vec<Vec<Stop>>,
}

impl StoppingFamily {
    pub fn n_paths(&self) -> usize {
        self.stops.len()
    }

    /// Number of levels with a nonempty event `E_j`.
    pub fn levels(&self) -> usize {
        self.stops.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn in_level(&self, path: usize, j: usize) -> bool {
        self.stops[path].len() > j
    }

    /// Positions nondecreasing on every path, scales finite and nonnegative.
    pub fn is_well_formed(&self) -> bool {
        self.stops.iter().all(|s| {
            s.windows(2).all(|w| w[1].position() >= w[0].position()) && s.iter().all(|t| t.scale.is_finite() && t.scale >= 0.0)
        })
    }

    /// Plain-text audit table `path,level,step,fraction,scale`.
    pub fn to_text(&self) -> String {
        let mut out = String::from("path,level,step,fraction,scale\n");
        for (p, s) in self.stops.iter().enumerate() {
            for (j, t) in s.iter().enumerate() {
                out.push_str(&format!("{p},{j},{},{},{}\n", t.step, t.fraction, t.scale));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseValue {
    pub total: Vec<f64>,
    pub contributions: Vec<Vec<f64>>,
}

impl SparseValue {
    pub fn from_contributions(contributions: Vec<Vec<f64>>) -> Self {
        let total = contributions.iter().map(|c| c.iter().sum()).collect();
        SparseValue { total, contributions }
    }

    /// `Σ_j scale_j χ_{E_j}` using the scales recorded by the construction.
    pub fn from_scales(family: &StoppingFamily) -> Self {
        Self::from_contributions(family.stops.iter().map(|s| s.iter().map(|t| t.scale).collect()).collect())
    }
}

/// A discrete sequence of `(X, Y)` values with the level scale at every point.
#[derive(Debug, Clone, Copy)]
pub struct PairSequence<'a> {
    pub dx: usize,
    pub dy: usize,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub scale: &'a [f64],
}

impl PairSequence<'_> {
    pub fn len(&self) -> usize {
        self.scale.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scale.is_empty()
    }

    fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dx..(i + 1) * self.dx]
    }

    fn y(&self, i: usize) -> &[f64] {
        &self.y[i * self.dy..(i + 1) * self.dy]
    }
}

/// Outcome of the `Y` construction on one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct YTrace {
    pub stops: Vec<Stop>,
    /// `Y^{n*}`: supremum of the level-`n` iterate over all times after `T^n`.
    pub iterate_max: Vec<f64>,
    pub ystar: f64,
}

/// `r X_i` for the step ending at point `i`, with `r = ΔY ⊗ ΔX / |ΔX|²` scaled down
/// to norm one if floating-point slack made `|ΔY| > |ΔX|`.
fn refoot(seq: &PairSequence, i: usize) -> Vec<f64> {
    let (x1, x0, y1, y0) = (seq.x(i), seq.x(i - 1), seq.y(i), seq.y(i - 1));
    let dx: Vec<f64> = x1.iter().zip(x0).map(|(a, b)| a - b).collect();
    let dy: Vec<f64> = y1.iter().zip(y0).map(|(a, b)| a - b).collect();
    let ndx2: f64 = dx.iter().map(|v| v * v).sum();
    if ndx2 == 0.0 {
        return vec![0.0; seq.dy];
    }
    let shrink = (ndx2.sqrt() / norm(&dy).max(f64::MIN_POSITIVE)).min(1.0);
    let proj: f64 = dx.iter().zip(x1).map(|(a, b)| a * b).sum::<f64>() / ndx2;
    dy.iter().map(|v| v * proj * shrink).collect()
}

/// The stopping procedure on one sequence: `T^0 = 0` when the scale at time 0 is
/// positive, and `T^{n+1}` is the first point where the re-footed iterate or `X`
/// exceeds `threshold` times the scale at `T^n`.
pub fn construct_y(seq: &PairSequence, threshold: f64, level_budget: usize) -> Result<YTrace> {
    let len = seq.len();
    let ystar = (0..len).map(|i| norm(seq.y(i))).fold(0.0, f64::max);
    if len == 0 || !(seq.scale[0] > 0.0) {
        return Ok(YTrace { stops: Vec::new(), iterate_max: Vec::new(), ystar });
    }
    let mut stops = vec![Stop { step: 0, fraction: 1.0, scale: seq.scale[0] }];
    let mut starts = vec![0usize];
    let mut feet = vec![seq.y(0).to_vec()];
    let mut bound = threshold * seq.scale[0];
    let mut iterate = vec![0.0; seq.dy];
    for i in 1..len {
        let s = *starts.last().unwrap();
        let foot = feet.last().unwrap();
        for k in 0..seq.dy {
            iterate[k] = foot[k] + seq.y(i)[k] - seq.y(s)[k];
        }
        if norm(&iterate) > bound || norm(seq.x(i)) > bound {
            if stops.len() >= level_budget {
                return Err(Error::Budget { what: "sparse levels".into(), value: (stops.len() + 1) as f64, limit: level_budget as f64 });
            }
            feet.push(refoot(seq, i));
            starts.push(i);
            stops.push(Stop { step: i, fraction: 1.0, scale: seq.scale[i] });
            bound = threshold * seq.scale[i];
        }
    }
    let iterate_max = starts
        .iter()
        .zip(&feet)
        .map(|(&s, foot)| {
            (s..len)
                .map(|i| {
                    let v: Vec<f64> = (0..seq.dy).map(|k| foot[k] + seq.y(i)[k] - seq.y(s)[k]).collect();
                    norm(&v)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(YTrace { stops, iterate_max, ystar })
}

/// Worst violation of `Y* <= Σ_{j<n} c·scale_j + Y^{n*}` over `n` (0 if none).
pub fn inductive_estimate_violation(trace: &YTrace, constant: f64) -> f64 {
    let mut partial = 0.0;
    let mut worst = 0.0f64;
    for n in 0..=trace.stops.len() {
        let tail = trace.iterate_max.get(n).copied().unwrap_or(0.0);
        worst = worst.max(trace.ystar - partial - tail);
        if n < trace.stops.len() {
            partial += constant * trace.stops[n].scale;
        }
    }
    worst
}

/// `Y`-family on a tree together with per-leaf traces.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeFamily {
    pub family: StoppingFamily,
    pub traces: Vec<YTrace>,
}

impl TreeFamily {
    pub fn ystar(&self) -> Vec<f64> {
        self.traces.iter().map(|t| t.ystar).collect()
    }
}

/// `E(|X_∞| | F_v)` at every node.
pub fn closure_norm(space: &TreeSpace, x: &TreeProcess) -> TreeProcess {
    let leaf_abs: Vec<f64> = (0..space.n_leaves()).map(|l| x.norm(space.leaf_node(l))).collect();
    TreeProcess::martingale_from_leaves(space, &leaf_abs, 1).expect("leaf norms are finite")
}

/// Largest `|ΔY| − |ΔX|` over edges, with `|Y_0| − |X_0|` at the root.
pub fn tree_subordination_defect(space: &TreeSpace, x: &TreeProcess, y: &TreeProcess) -> f64 {
    let mut worst = y.norm(0) - x.norm(0);
    for v in 1..space.n_nodes() {
        let p = space.parent(v);
        let dx: Vec<f64> = x.value(v).iter().zip(x.value(p)).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = y.value(v).iter().zip(y.value(p)).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&dy) - norm(&dx));
    }
    worst
}

pub fn build_sparse_family_y_tree(space: &TreeSpace, x: &TreeProcess, y: &TreeProcess, threshold: f64) -> Result<TreeFamily> {
    let defect = tree_subordination_defect(space, x, y);
    let scale_ref = 1.0 + x.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if defect > 1e-12 * scale_ref {
        return Err(Error::NotSubordinate { worst: defect, at: 0 });
    }
    let cn = closure_norm(space, x);
    let mut stops = Vec::with_capacity(space.n_leaves());
    let mut traces = Vec::with_capacity(space.n_leaves());
    let (dx, dy) = (x.dim, y.dim);
    for leaf in 0..space.n_leaves() {
        let nodes = space.path(leaf);
        let xs: Vec<f64> = nodes.iter().flat_map(|&v| x.value(v).to_vec()).collect();
        let ys: Vec<f64> = nodes.iter().flat_map(|&v| y.value(v).to_vec()).collect();
        let sc: Vec<f64> = nodes.iter().map(|&v| cn.values[v]).collect();
        let seq = PairSequence { dx, dy, x: &xs, y: &ys, scale: &sc };
        let trace = construct_y(&seq, threshold, DEFAULT_LEVEL_BUDGET)?;
        stops.push(trace.stops.clone());
        traces.push(trace);
    }
    Ok(TreeFamily { family: StoppingFamily { provenance: Provenance::YConstruction, stops }, traces })
}

/// Level scale `E(|X_T| | F_t)` for a scalar `X` whose remaining increments are a
/// centered normal of variance `gauss_var` plus a Poisson(`jump_mean`) number of
/// independent centered normal jumps of variance `jump_var`.
pub fn gaussian_mixture_abs_mean(x: f64, gauss_var: f64, jump_mean: f64, jump_var: f64) -> f64 {
    let abs_normal = |v: f64| -> f64 {
        if v <= 0.0 {
            return x.abs();
        }
        let s = v.sqrt();
        let z = x / s;
        x * (1.0 - 2.0 * normal_cdf(-z)) + 2.0 * s * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    if jump_mean <= 0.0 || jump_var <= 0.0 {
        return abs_normal(gauss_var);
    }
    let mut weight = (-jump_mean).exp();
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut m = 0usize;
    while mass < 1.0 - 1e-15 && m < 10_000 {
        total += weight * abs_normal(gauss_var + m as f64 * jump_var);
        mass += weight;
        m += 1;
        weight *= jump_mean / m as f64;
    }
    total
}

/// Standard normal distribution function.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Law of the increments driving a scalar path, used for the scale `E(|X_T| | F_t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncrementLaw {
    pub variance_rate: f64,
    pub jump_rate: f64,
    pub jump_sd: f64,
}

/// Level scales along the skeleton of a scalar path closed at its horizon.
pub fn skeleton_scales(path: &CadlagPath, skeleton: &Skeleton, law: &IncrementLaw) -> Vec<f64> {
    let n = path.grid.steps();
    let dt = path.grid.dt;
    (0..skeleton.len())
        .map(|i| {
            let k = if i == 0 { 0 } else { skeleton.grid_index[i - 1] };
            let rem = (n - k) as f64 * dt;
            gaussian_mixture_abs_mean(skeleton.point(i)[0], law.variance_rate * rem, law.jump_rate * rem, law.jump_sd * law.jump_sd)
        })
        .collect()
}

/// `Y`-family on a batch of scalar-`X` path pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFamily {
    pub family: StoppingFamily,
    pub traces: Vec<YTrace>,
}

pub fn build_sparse_family_y_paths(pairs: &[(CadlagPath, CadlagPath)], law: &IncrementLaw, threshold: f64) -> Result<PathFamily> {
    let traces: Vec<Result<YTrace>> = {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|(x, y)| {
                if x.dim != 1 {
                    return Err(Error::Dimension("path families need a scalar X".into()));
                }
                let rep = crate::paths::check_differential_subordination(x, y, None)?;
                if !rep.ok {
                    return Err(Error::NotSubordinate { worst: rep.worst_violation, at: rep.worst_index });
                }
                let sk = crate::paths::joint_skeleton(&[x, y]);
                let scale = skeleton_scales(x, &sk[0], law);
                let seq = PairSequence { dx: 1, dy: y.dim, x: &sk[0].points, y: &sk[1].points, scale: &scale };
                construct_y(&seq, threshold, DEFAULT_LEVEL_BUDGET)
            })
            .collect()
    };
    let traces: Vec<YTrace> = traces.into_iter().collect::<Result<_>>()?;
    let stops = traces.iter().map(|t| t.stops.clone()).collect();
    Ok(PathFamily { family: StoppingFamily { provenance: Provenance::YConstruction, stops }, traces })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparseMode {
    SampleAtStop,
    ConditionalExpectation,
}

/// Sparse operator on a tree with base `|base|`; in conditional-expectation mode the
/// level-`j` contribution is `E(|base_∞| | F_{T^j})`.
pub fn sparse_operator_tree(space: &TreeSpace, base: &TreeProcess, family: &StoppingFamily, mode: SparseMode) -> Result<SparseValue> {
    if family.n_paths() != space.n_leaves() {
        return Err(Error::GridMismatch(format!("family has {} paths, tree has {} leaves", family.n_paths(), space.n_leaves())));
    }
    let cn = closure_norm(space, base);
    let contributions = family
        .stops
        .iter()
        .enumerate()
        .map(|(leaf, s)| {
            s.iter()
                .map(|t| {
                    let v = space.ancestor(space.leaf_node(leaf), t.step);
                    match mode {
                        SparseMode::SampleAtStop => base.norm(v),
                        SparseMode::ConditionalExpectation => cn.values[v],
                    }
                })
                .collect()
        })
        .collect();
    Ok(SparseValue::from_contributions(contributions))
}

/// Sample-at-stop operator on skeletons: `|base|` at each stop, interpolated linearly
/// inside a step for fractional stops.
pub fn sparse_operator_sampled(bases: &[Skeleton], family: &StoppingFamily) -> Result<SparseValue> {
    if bases.len() != family.n_paths() {
        return Err(Error::GridMismatch(format!("{} base paths for {} family paths", bases.len(), family.n_paths())));
    }
    let contributions = family
        .stops
        .iter()
        .zip(bases)
        .map(|(s, b)| {
            s.iter()
                .map(|t| {
                    if t.step == 0 || t.fraction >= 1.0 {
                        norm(b.point(t.step))
                    } else {
                        let (p0, p1) = (b.point(t.step - 1), b.point(t.step));
                        let v: Vec<f64> = p0.iter().zip(p1).map(|(a, c)| a + t.fraction * (c - a)).collect();
                        norm(&v)
                    }
                })
                .collect()
        })
        .collect();
    Ok(SparseValue::from_contributions(contributions))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityReport {
    pub ok: bool,
    pub max_ratio: f64,
    /// `(level, atom)`: the stop node on trees, `bin` index on batches (`usize::MAX` for the whole level).
    pub witness: Option<(usize, usize)>,
    pub atoms_checked: usize,
    pub atoms_skipped: usize,
    /// Largest `ratio − allowed` over atoms; nonpositive when ok.
    pub worst_excess: f64,
    pub exact: bool,
}

/// Exact check over every atom of every `F_{T^j} ∩ E_j`.
pub fn verify_sparsity_tree(space: &TreeSpace, family: &StoppingFamily) -> Result<SparsityReport> {
    if family.n_paths() != space.n_leaves() {
        return Err(Error::GridMismatch(format!("family has {} paths, tree has {} leaves", family.n_paths(), space.n_leaves())));
    }
    let probs = space.leaf_probs();
    let mut report = SparsityReport { ok: true, max_ratio: 0.0, witness: None, atoms_checked: 0, atoms_skipped: 0, worst_excess: f64::NEG_INFINITY, exact: true };
    let levels = family.levels();
    for j in 0..levels.saturating_sub(0) {
        let mut atoms: Vec<(usize, f64, f64)> = Vec::new();
        for leaf in 0..space.n_leaves() {
            let s = &family.stops[leaf];
            if s.len() <= j {
                continue;
            }
            let node = space.ancestor(space.leaf_node(leaf), s[j].step);
            let next = if s.len() > j + 1 { probs[leaf] } else { 0.0 };
            match atoms.last_mut() {
                Some(a) if a.0 == node => {
                    a.1 += probs[leaf];
                    a.2 += next;
                }
                _ => atoms.push((node, probs[leaf], next)),
            }
        }
        for (node, p, q) in atoms {
            if p <= 0.0 {
                report.atoms_skipped += 1;
                continue;
            }
            report.atoms_checked += 1;
            let ratio = q / p;
            let excess = ratio - 0.5;
            if excess > report.worst_excess {
                report.worst_excess = excess;
            }
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.witness = Some((j, node));
            }
            if excess > 1e-12 {
                report.ok = false;
            }
        }
    }
    if report.atoms_checked == 0 {
        report.worst_excess = 0.0;
    }
    Ok(report)
}

/// Binned check on a batch: atoms are the cells of a `bins × bins` grid over
/// (level scale, stop position) within `E_j`, plus `E_j` itself. A cell passes when
/// its ratio is at most `1/2 + 3 sqrt(1/(4 n))`. Sets that are not unions of cells
/// are not tested.
pub fn verify_sparsity_binned(family: &StoppingFamily, bins: usize) -> SparsityReport {
    let mut report = SparsityReport { ok: true, max_ratio: 0.0, witness: None, atoms_checked: 0, atoms_skipped: 0, worst_excess: f64::NEG_INFINITY, exact: false };
    for j in 0..family.levels() {
        let members: Vec<(f64, f64, bool)> = family
            .stops
            .iter()
            .filter(|s| s.len() > j)
            .map(|s| (s[j].scale, s[j].position(), s.len() > j + 1))
            .collect();
        let range = |f: &dyn Fn(&(f64, f64, bool)) -> f64| {
            members.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(f(m)), hi.max(f(m))))
        };
        let (slo, shi) = range(&|m| m.0);
        let (plo, phi) = range(&|m| m.1);
        let cell = |v: f64, lo: f64, hi: f64| -> usize {
            if hi > lo {
                (((v - lo) / (hi - lo)) * bins as f64).floor().min(bins as f64 - 1.0) as usize
            } else {
                0
            }
        };
        let mut counts = vec![(0usize, 0usize); bins * bins];
        for m in &members {
            let c = cell(m.0, slo, shi) * bins + cell(m.1, plo, phi);
            counts[c].0 += 1;
            counts[c].1 += m.2 as usize;
        }
        let whole = (members.len(), members.iter().filter(|m| m.2).count());
        for (atom, &(n, k)) in counts.iter().enumerate().chain(std::iter::once((usize::MAX, &whole))) {
            if n == 0 {
                report.atoms_skipped += 1;
                continue;
            }
            report.atoms_checked += 1;
            let ratio = k as f64 / n as f64;
            let allowed = 0.5 + 3.0 * (0.25 / n as f64).sqrt();
            let excess = ratio - allowed;
            if excess > report.worst_excess {
                report.worst_excess = excess;
            }
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.witness = Some((j, atom));
            }
            if excess > 0.0 {
                report.ok = false;
            }
        }
    }
    if report.atoms_checked == 0 {
        report.worst_excess = 0.0;
    }
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominationReport {
    pub ok: bool,
    pub constant: f64,
    /// `max Y*/S` over paths with `S > 0`.
    pub worst_ratio: f64,
    pub violations: usize,
    pub witness: Option<usize>,
}

/// Checks `Y* <= constant · S + 1e-9 (1 + Y*)` on every path.
pub fn verify_domination(ystar: &[f64], s: &SparseValue, constant: f64) -> Result<DominationReport> {
    if ystar.len() != s.total.len() {
        return Err(Error::GridMismatch(format!("{} maxima for {} sparse values", ystar.len(), s.total.len())));
    }
    let mut rep = DominationReport { ok: true, constant, worst_ratio: 0.0, violations: 0, witness: None };
    let mut worst_excess = f64::NEG_INFINITY;
    for (i, (&m, &sv)) in ystar.iter().zip(&s.total).enumerate() {
        let tol = 1e-9 * (1.0 + m);
        if sv > 0.0 {
            rep.worst_ratio = rep.worst_ratio.max(m / sv);
        }
        let excess = m - constant * sv - tol;
        if excess > 0.0 {
            rep.ok = false;
            rep.violations += 1;
        }
        if excess > worst_excess && (excess > 0.0 || rep.witness.is_none()) {
            worst_excess = excess;
            if excess > 0.0 {
                rep.witness = Some(i);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treespace::{uniform_tree, TreeProcess};

    #[test]
    fn zero_process_gives_empty_family() {
        let t = uniform_tree(3, 2).unwrap();
        let x = TreeProcess::martingale_from_leaves(&t, &[0.0; 8], 1).unwrap();
        let fam = build_sparse_family_y_tree(&t, &x, &x, 4.0).unwrap();
        assert_eq!(fam.family.levels(), 0);
        let s = SparseValue::from_scales(&fam.family);
        assert!(s.total.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_process_single_level() {
        let t = uniform_tree(3, 2).unwrap();
        let x = TreeProcess::martingale_from_leaves(&t, &[2.5; 8], 1).unwrap();
        let fam = build_sparse_family_y_tree(&t, &x, &x, 4.0).unwrap();
        assert!(fam.family.stops.iter().all(|s| s.len() == 1 && s[0].step == 0));
        let rep = verify_sparsity_tree(&t, &fam.family).unwrap();
        assert!(rep.ok);
        let s = sparse_operator_tree(&t, &x, &fam.family, SparseMode::SampleAtStop).unwrap();
        assert!(s.total.iter().all(|&v| v == 2.5));
    }

    #[test]
    fn adversarial_family_fails() {
        let t = uniform_tree(2, 2).unwrap();
        let stops = vec![vec![Stop { step: 0, fraction: 1.0, scale: 1.0 }, Stop { step: 0, fraction: 1.0, scale: 1.0 }]; 4];
        let fam = StoppingFamily { provenance: Provenance::YConstruction, stops };
        let rep = verify_sparsity_tree(&t, &fam).unwrap();
        assert_eq!(rep.max_ratio, 1.0);
        assert!(!rep.ok);
    }

    #[test]
    fn domination_zero_maxima() {
        let s = SparseValue::from_contributions(vec![vec![], vec![1.0]]);
        assert!(verify_domination(&[0.0, 0.0], &s, 8.0).unwrap().ok);
        let bad = verify_domination(&[1.0, 0.0], &s, 8.0).unwrap();
        assert_eq!((bad.ok, bad.violations, bad.witness), (false, 1, Some(0)));
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
        assert!((normal_cdf(5.0) - 0.999_999_713_348_428).abs() < 1e-15);
    }

    #[test]
    fn abs_mean_of_normal() {
        // E|N(0,1)| = sqrt(2/pi)
        assert!((gaussian_mixture_abs_mean(0.0, 1.0, 0.0, 0.0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        assert_eq!(gaussian_mixture_abs_mean(-3.0, 0.0, 0.0, 0.0), 3.0);
    }
}
