//! Weights, the `A_p` characteristic on trees, weighted norms, and exact checks of
//! the weighted sparse, Doob and extrapolation bounds.

use crate::error::{invalid, Error, Result};
use crate::sparse::{build_sparse_family_y_tree, sparse_operator_tree, SparseMode, StoppingFamily};
use crate::treespace::{count_stopping_times, for_each_stopping_time, norm, TreeProcess, TreeSpace, TreeStoppingTime, MAX_STOPPING_TIMES};

/// A positive tree martingale `w` with its dual weight `u` (`u^p w = u`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProcess {
    pub p: f64,
    w: TreeProcess,
    u: TreeProcess,
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("exponent must lie in (1, inf), got {p}"));
    }
    Ok(())
}

impl WeightProcess {
    /// Extends positive terminal values to a martingale by exact averaging.
    pub fn from_leaves(space: &TreeSpace, leaf_w: &[f64], p: f64) -> Result<Self> {
        check_exponent(p)?;
        if let Some((i, &v)) = leaf_w.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return invalid(format!("weight must be positive and finite, leaf {i} has {v}"));
        }
        let w = TreeProcess::martingale_from_leaves(space, leaf_w, 1)?;
        let dual: Vec<f64> = leaf_w.iter().map(|v| v.powf(-1.0 / (p - 1.0))).collect();
        let u = TreeProcess::martingale_from_leaves(space, &dual, 1)?;
        Ok(WeightProcess { p, w, u })
    }

    pub fn constant(space: &TreeSpace, p: f64) -> Result<Self> {
        Self::from_leaves(space, &vec![1.0; space.n_leaves()], p)
    }

    /// Same terminal weight, new exponent.
    pub fn with_exponent(&self, space: &TreeSpace, p: f64) -> Result<Self> {
        Self::from_leaves(space, self.w.leaf_values(space), p)
    }

    pub fn w(&self) -> &TreeProcess {
        &self.w
    }

    pub fn u(&self) -> &TreeProcess {
        &self.u
    }

    pub fn leaf_weights<'a>(&'a self, space: &TreeSpace) -> &'a [f64] {
        self.w.leaf_values(space)
    }

    /// `w_v u_v^{p−1}` at a node.
    pub fn node_characteristic(&self, v: usize) -> f64 {
        self.w.values[v] * self.u.values[v].powf(self.p - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApMode {
    /// Supremum over the complete list of stopping times.
    Enumerated,
    /// Maximum of `w_v u_v^{p−1}` over nodes; equal to the supremum because every
    /// single node is the stop set of some stopping time and `τ = ∞` contributes 1.
    NodeMaximum,
    /// Supremum over a sampled sub-family: a lower bound only.
    SampledLowerBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApReport {
    pub q: f64,
    pub attaining: TreeStoppingTime,
    pub mode: ApMode,
    pub examined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApMethod {
    /// Enumerate when the count is at most the limit, otherwise the node maximum.
    Auto { enumeration_limit: f64 },
    Enumerate,
    NodeMaximum,
    Sampled { count: usize, seed: u64 },
}

/// `ess sup w_τ u_τ^{p−1}` for one stopping time (1 on the unstopped part).
pub fn characteristic_at(space: &TreeSpace, w: &WeightProcess, stop_nodes: &[usize]) -> f64 {
    let mut q = stop_nodes.iter().map(|&v| w.node_characteristic(v)).fold(f64::NEG_INFINITY, f64::max);
    let stopped_mass: f64 = stop_nodes.iter().map(|&v| space.prob(v)).sum();
    if stopped_mass < 1.0 - 1e-12 {
        q = q.max(1.0);
    }
    q
}

fn node_maximum(space: &TreeSpace, w: &WeightProcess) -> (f64, usize) {
    (0..space.n_nodes()).map(|v| (w.node_characteristic(v), v)).fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a })
}

/// Supremum over an explicit list of stopping times.
pub fn ap_over(space: &TreeSpace, w: &WeightProcess, times: &[TreeStoppingTime]) -> Result<ApReport> {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, t) in times.iter().enumerate() {
        let q = characteristic_at(space, w, &t.stop_nodes(space));
        if q > best.0 {
            best = (q, i);
        }
    }
    if times.is_empty() {
        return invalid("no stopping times supplied");
    }
    Ok(ApReport { q: best.0, attaining: times[best.1].clone(), mode: ApMode::SampledLowerBound, examined: times.len() })
}

pub fn ap_characteristic(space: &TreeSpace, w: &WeightProcess) -> Result<ApReport> {
    ap_characteristic_with(space, w, ApMethod::Auto { enumeration_limit: MAX_STOPPING_TIMES })
}

pub fn ap_characteristic_with(space: &TreeSpace, w: &WeightProcess, method: ApMethod) -> Result<ApReport> {
    let depth = space.levels();
    let report = match method {
        ApMethod::Auto { enumeration_limit } => {
            if count_stopping_times(space, depth) <= enumeration_limit {
                return ap_characteristic_with(space, w, ApMethod::Enumerate);
            }
            return ap_characteristic_with(space, w, ApMethod::NodeMaximum);
        }
        ApMethod::NodeMaximum => {
            let (q, v) = node_maximum(space, w);
            ApReport { q: q.max(1.0), attaining: TreeStoppingTime::from_nodes(space, &[v]), mode: ApMode::NodeMaximum, examined: space.n_nodes() }
        }
        ApMethod::Enumerate => {
            let mut best = f64::NEG_INFINITY;
            let mut arg: Vec<usize> = Vec::new();
            let examined = for_each_stopping_time(space, depth, |nodes| {
                let q = characteristic_at(space, w, nodes);
                if q > best {
                    best = q;
                    arg = nodes.to_vec();
                }
            })?;
            ApReport { q: best, attaining: TreeStoppingTime::from_nodes(space, &arg), mode: ApMode::Enumerated, examined }
        }
        ApMethod::Sampled { count, seed } => {
            let times = crate::treespace::sample_stopping_times(space, depth, count, seed);
            ap_over(space, w, &times)?
        }
    };
    if report.q < 1.0 - 1e-12 {
        return Err(Error::Construction(format!("A_p characteristic {} below 1", report.q)));
    }
    Ok(report)
}

/// `(Σ π |v|^p w)^{1/p}` over leaves; `values` holds `dim` entries per leaf.
pub fn weighted_norm(space: &TreeSpace, values: &[f64], dim: usize, leaf_w: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if values.len() != space.n_leaves() * dim || leaf_w.len() != space.n_leaves() {
        return Err(Error::Dimension(format!("{} values and {} weights for {} leaves", values.len(), leaf_w.len(), space.n_leaves())));
    }
    let s: f64 = space.leaf_probs().iter().enumerate().map(|(l, pr)| pr * norm(&values[l * dim..(l + 1) * dim]).powf(p) * leaf_w[l]).sum();
    Ok(s.powf(1.0 / p))
}

/// Sample-mean analogue of [`weighted_norm`].
pub fn weighted_norm_samples(values: &[f64], weights: &[f64], p: f64) -> Result<f64> {
    check_exponent(p)?;
    if values.len() != weights.len() || values.is_empty() {
        return Err(Error::Dimension("values and weights must be nonempty and of equal length".into()));
    }
    let s: f64 = values.iter().zip(weights).map(|(v, w)| v.abs().powf(p) * w).sum();
    Ok((s / values.len() as f64).powf(1.0 / p))
}

/// `p^{p'}/(p−1)` with `p' = p/(p−1)`.
pub fn doob_constant(p: f64) -> Result<f64> {
    check_exponent(p)?;
    let pd = p / (p - 1.0);
    Ok(p.powf(pd) / (p - 1.0))
}

/// Extrapolated bound `N_p(B)` from a bound `N_r` at exponent `r`.
pub fn extrapolate_bound(n_r: &dyn Fn(f64) -> f64, r: f64, p: f64, b: f64) -> Result<f64> {
    check_exponent(r)?;
    check_exponent(p)?;
    if !(b >= 1.0) {
        return invalid(format!("characteristic bound must be at least 1, got {b}"));
    }
    if p == r {
        return Ok(n_r(b));
    }
    if p > r {
        let pd = p / (p - 1.0);
        let c = doob_constant(pd)?;
        Ok(2f64.powf(1.0 / r) * n_r(2.0 * c.powf((p - r) / (p - 1.0)) * b))
    } else {
        let c = doob_constant(p)?;
        Ok(2f64.powf((r - 1.0) / r) * n_r(2f64.powf(r - 1.0) * (c.powf(p - r) * b).powf((r - 1.0) / (p - 1.0))))
    }
}

/// The weighted sparse bound at exponent `p`: `8 B` at `p = 2`, extrapolated otherwise.
pub fn sparse_bound(p: f64, q: f64) -> Result<f64> {
    extrapolate_bound(&|a| 8.0 * a, 2.0, p, q.max(1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedReport {
    pub p: f64,
    pub q: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub ok: bool,
}

fn report(p: f64, q: f64, lhs: f64, rhs: f64) -> WeightedReport {
    let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
    WeightedReport { p, q, lhs, rhs, ratio, ok: lhs <= rhs * (1.0 + 1e-12) + 1e-300 }
}

/// `‖S(X)‖_{L^p(w)} <= N_p(Q_p(w)) ‖X‖_{L^p(w)}` with `S` the sparse operator of `family`.
pub fn verify_weighted_sparse(space: &TreeSpace, x: &TreeProcess, family: &StoppingFamily, w: &WeightProcess) -> Result<WeightedReport> {
    let s = sparse_operator_tree(space, x, family, SparseMode::ConditionalExpectation)?;
    let q = ap_characteristic_with(space, w, ApMethod::NodeMaximum)?.q;
    let lw = w.leaf_weights(space);
    let lhs = weighted_norm(space, &s.total, 1, lw, w.p)?;
    let xn = weighted_norm(space, x.leaf_values(space), x.dim, lw, w.p)?;
    Ok(report(w.p, q, lhs, sparse_bound(w.p, q)? * xn))
}

/// Builds the `Y`-family for `(x, x)` and checks the weighted sparse bound at `p = 2`.
pub fn verify_weighted_sparse_l2(space: &TreeSpace, x: &TreeProcess, w: &WeightProcess) -> Result<WeightedReport> {
    if w.p != 2.0 {
        return invalid("the L2 check needs a weight at p = 2");
    }
    let fam = build_sparse_family_y_tree(space, x, x, crate::sparse::DEFAULT_THRESHOLD)?;
    verify_weighted_sparse(space, x, &fam.family, w)
}

/// Running maximum `X*` per leaf.
pub fn tree_maximal(space: &TreeSpace, x: &TreeProcess) -> Vec<f64> {
    let mut m = vec![0.0; space.n_nodes()];
    for v in 0..space.n_nodes() {
        let own = x.norm(v);
        m[v] = if v == 0 { own } else { own.max(m[space.parent(v)]) };
    }
    (0..space.n_leaves()).map(|l| m[space.leaf_node(l)]).collect()
}

/// `‖X*‖_{L^p(w)} <= C_p Q_p(w)^{1/(p−1)} ‖X‖_{L^p(w)}`.
pub fn verify_doob_weighted(space: &TreeSpace, x: &TreeProcess, w: &WeightProcess) -> Result<WeightedReport> {
    let p = w.p;
    let q = ap_characteristic_with(space, w, ApMethod::NodeMaximum)?.q;
    let lw = w.leaf_weights(space);
    let lhs = weighted_norm(space, &tree_maximal(space, x), 1, lw, p)?;
    let xn = weighted_norm(space, x.leaf_values(space), x.dim, lw, p)?;
    Ok(report(p, q, lhs, doob_constant(p)? * q.powf(1.0 / (p - 1.0)) * xn))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessRow {
    pub depth: usize,
    pub q: f64,
    pub ratio_full: f64,
    pub ratio_half: f64,
}

/// Two-point weights on dyadic trees of growing depth: `w = 2^{−n}` on the leftmost
/// leaf and 1 elsewhere, tested with `X` the martingale closed by `w^{−1/(p−1)}` on
/// that leaf. Reports `‖X*‖ / (Q^e ‖X‖)` for `e = 1/(p−1)` and `e = 1/(2(p−1))`.
pub fn sharpness_probe(p: f64, depths: &[usize]) -> Result<Vec<SharpnessRow>> {
    check_exponent(p)?;
    depths
        .iter()
        .map(|&n| {
            let space = crate::treespace::uniform_tree(n, 2)?;
            let small = 0.5f64.powi(n as i32);
            let mut lw = vec![1.0; space.n_leaves()];
            lw[0] = small;
            let w = WeightProcess::from_leaves(&space, &lw, p)?;
            let mut f = vec![0.0; space.n_leaves()];
            f[0] = small.powf(-1.0 / (p - 1.0));
            let x = TreeProcess::martingale_from_leaves(&space, &f, 1)?;
            let q = ap_characteristic_with(&space, &w, ApMethod::NodeMaximum)?.q;
            let lhs = weighted_norm(&space, &tree_maximal(&space, &x), 1, &lw, p)?;
            let xn = weighted_norm(&space, &f, 1, &lw, p)?;
            Ok(SharpnessRow {
                depth: n,
                q,
                ratio_full: lhs / (q.powf(1.0 / (p - 1.0)) * xn),
                ratio_half: lhs / (q.powf(0.5 / (p - 1.0)) * xn),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treespace::{build_tree, uniform_tree};

    fn coin() -> TreeSpace {
        build_tree(1, &[2], &[vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn coin_characteristic() {
        let s = coin();
        let w = WeightProcess::from_leaves(&s, &[2.0, 0.5], 2.0).unwrap();
        let r = ap_characteristic(&s, &w).unwrap();
        assert_eq!(r.mode, ApMode::Enumerated);
        assert_eq!(r.examined, 5);
        assert!((r.q - 25.0 / 16.0).abs() < 1e-12);
        assert_eq!(r.attaining.stop_nodes(&s), vec![0]);
        let dual = WeightProcess::from_leaves(&s, &[0.5, 2.0], 2.0).unwrap();
        assert!((ap_characteristic(&s, &dual).unwrap().q - r.q).abs() < 1e-12);
    }

    #[test]
    fn constant_weight() {
        let s = uniform_tree(3, 2).unwrap();
        for p in [1.5, 2.0, 3.0] {
            let w = WeightProcess::constant(&s, p).unwrap();
            assert!((ap_characteristic(&s, &w).unwrap().q - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        let s = coin();
        assert!(WeightProcess::from_leaves(&s, &[1.0, 0.0], 2.0).is_err());
        assert!(WeightProcess::from_leaves(&s, &[1.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn coin_weighted_norm() {
        let s = coin();
        let n = weighted_norm(&s, &[1.0, 3.0], 1, &[2.0, 0.5], 2.0).unwrap();
        assert!((n - 3.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn doob_constant_values() {
        assert!((doob_constant(2.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(doob_constant(1.0).is_err());
    }

    #[test]
    fn extrapolation_identity() {
        let n = |a: f64| 8.0 * a;
        assert_eq!(extrapolate_bound(&n, 2.0, 2.0, 3.0).unwrap(), 24.0);
        assert!(extrapolate_bound(&n, 2.0, f64::INFINITY, 1.0).is_err());
        assert!(extrapolate_bound(&n, 1.0, 2.0, 1.0).is_err());
    }
}
