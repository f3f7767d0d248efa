//! Finite filtered probability spaces as rooted weighted trees.
//!
//! Nodes are stored level by level in breadth-first order, so the children of a
//! node and the leaves below it occupy contiguous index ranges. Every root-to-leaf
//! path has the same length; a path of the tree is an outcome and the level-`k`
//! node on it is the atom of the time-`k` sigma-algebra containing that outcome.

use crate::error::{invalid, Error, Result};
use rand::Rng;

pub const MAX_DEPTH: usize = 12;
pub const MAX_LEAVES: usize = 1 << 20;
pub const MAX_STOPPING_TIMES: f64 = 1e7;
const STOCHASTIC_TOL: f64 = 1e-12;

/// Sentinel parent of the root.
pub const NO_PARENT: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpace {
    levels: usize,
    level_start: Vec<usize>,
    level: Vec<usize>,
    parent: Vec<usize>,
    transition: Vec<f64>,
    prob: Vec<f64>,
    first_child: Vec<usize>,
    child_count: Vec<usize>,
    leaf_lo: Vec<usize>,
    leaf_hi: Vec<usize>,
}

impl TreeSpace {
    /// Builds a tree from explicit level lists. `levels[k]` lists the nodes at depth
    /// `k + 1` as `(parent index within depth k, transition probability)`, grouped by
    /// parent in nondecreasing order.
    pub fn from_levels(levels: &[Vec<(usize, f64)>]) -> Result<Self> {
        let depth = levels.len();
        if depth > MAX_DEPTH {
            return Err(Error::Budget { what: "tree depth".into(), value: depth as f64, limit: MAX_DEPTH as f64 });
        }
        let mut level_start = vec![0usize, 1];
        let mut level = vec![0usize];
        let mut parent = vec![NO_PARENT];
        let mut transition = vec![1.0];
        let mut prob = vec![1.0];
        for (k, nodes) in levels.iter().enumerate() {
            let prev_lo = level_start[k];
            let prev_n = level_start[k + 1] - prev_lo;
            if nodes.len() > MAX_LEAVES {
                return Err(Error::Budget { what: "nodes per level".into(), value: nodes.len() as f64, limit: MAX_LEAVES as f64 });
            }
            let mut sums = vec![0.0; prev_n];
            let mut last = 0usize;
            for &(p, t) in nodes {
                if p >= prev_n {
                    return invalid(format!("level {} names parent {p} but level {k} has {prev_n} nodes", k + 1));
                }
                if p < last {
                    return invalid(format!("level {} is not grouped by parent", k + 1));
                }
                last = p;
                let row = prev_lo + p;
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::NonStochastic { row, reason: format!("transition {t} is not strictly positive") });
                }
                sums[p] += t;
                level.push(k + 1);
                parent.push(row);
                transition.push(t);
                prob.push(prob[row] * t);
            }
            for (p, s) in sums.iter().enumerate() {
                if (s - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(Error::NonStochastic { row: prev_lo + p, reason: format!("row sums to {s}") });
                }
            }
            level_start.push(level.len());
        }
        let n = level.len();
        let mut first_child = vec![n; n];
        let mut child_count = vec![0usize; n];
        for v in (1..n).rev() {
            first_child[parent[v]] = v;
            child_count[parent[v]] += 1;
        }
        let leaf_first = level_start[depth];
        let mut leaf_lo = vec![usize::MAX; n];
        let mut leaf_hi = vec![0usize; n];
        for v in (0..n).rev() {
            if level[v] == depth {
                leaf_lo[v] = v - leaf_first;
                leaf_hi[v] = v - leaf_first + 1;
            }
            if v > 0 {
                let p = parent[v];
                leaf_lo[p] = leaf_lo[p].min(leaf_lo[v]);
                leaf_hi[p] = leaf_hi[p].max(leaf_hi[v]);
            }
        }
        let space = TreeSpace { levels: depth, level_start, level, parent, transition, prob, first_child, child_count, leaf_lo, leaf_hi };
        let total: f64 = space.leaf_probs().iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("leaf probabilities sum to {total}"));
        }
        Ok(space)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_nodes(&self) -> usize {
        self.level.len()
    }

    pub fn n_leaves(&self) -> usize {
        self.n_nodes() - self.level_start[self.levels]
    }

    pub fn level_range(&self, k: usize) -> std::ops::Range<usize> {
        self.level_start[k]..self.level_start[k + 1]
    }

    pub fn leaf_node(&self, leaf: usize) -> usize {
        self.level_start[self.levels] + leaf
    }

    pub fn level(&self, v: usize) -> usize {
        self.level[v]
    }

    pub fn parent(&self, v: usize) -> usize {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> std::ops::Range<usize> {
        self.first_child[v]..self.first_child[v] + self.child_count[v]
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.level[v] == self.levels
    }

    /// Transition probability from the parent of `v` to `v`.
    pub fn transition(&self, v: usize) -> f64 {
        self.transition[v]
    }

    /// Probability of the atom `v`.
    pub fn prob(&self, v: usize) -> f64 {
        self.prob[v]
    }

    pub fn leaf_probs(&self) -> &[f64] {
        &self.prob[self.level_start[self.levels]..]
    }

    /// Leaves below `v` as a range of leaf indices.
    pub fn leaves_below(&self, v: usize) -> std::ops::Range<usize> {
        self.leaf_lo[v]..self.leaf_hi[v]
    }

    /// Ancestor of `v` at depth `k <= level(v)`.
    pub fn ancestor(&self, mut v: usize, k: usize) -> usize {
        while self.level[v] > k {
            v = self.parent[v];
        }
        v
    }

    /// Nodes on the root-to-leaf path of `leaf`, root first.
    pub fn path(&self, leaf: usize) -> Vec<usize> {
        let mut out = vec![0; self.levels + 1];
        let mut v = self.leaf_node(leaf);
        for k in (0..=self.levels).rev() {
            out[k] = v;
            if k > 0 {
                v = self.parent[v];
            }
        }
        out
    }

    pub fn is_internal(&self, v: usize) -> bool {
        !self.is_leaf(v)
    }

    /// Plain-text form: one line per node, `level parent probability`, where parent
    /// is the index within the previous level (`-` for the root).
    pub fn to_text(&self) -> String {
        let mut s = String::from("# level parent probability\n0 - 1\n");
        for v in 1..self.n_nodes() {
            let p = self.parent[v] - self.level_start[self.level[v] - 1];
            s.push_str(&format!("{} {} {:?}\n", self.level[v], p, self.transition[v]));
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut levels: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut seen_root = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| Error::Parse { line: i + 1, reason: reason.to_string() };
            let fields: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|f| !f.is_empty()).collect();
            if fields.len() != 3 {
                return Err(err("expected three fields: level parent probability"));
            }
            let k: usize = fields[0].parse().map_err(|_| err("level is not an integer"))?;
            if k == 0 {
                if seen_root {
                    return Err(err("second root line"));
                }
                seen_root = true;
                continue;
            }
            if !seen_root {
                return Err(err("root line `0 - 1` must come first"));
            }
            let p: usize = fields[1].parse().map_err(|_| err("parent is not an integer"))?;
            let t: f64 = fields[2].parse().map_err(|_| err("probability is not a number"))?;
            if k > levels.len() + 1 || (k < levels.len()) {
                return Err(err("levels must appear in nondecreasing order without gaps"));
            }
            if k == levels.len() + 1 {
                levels.push(Vec::new());
            }
            levels[k - 1].push((p, t));
        }
        if !seen_root {
            return Err(Error::Parse { line: 0, reason: "empty tree description".into() });
        }
        TreeSpace::from_levels(&levels)
    }
}

/// Regular tree with `branching[k]` children per depth-`k` node.
///
/// `probs` either holds one row per depth (shared by all nodes of that depth) or one
/// row per internal node in breadth-first order. A single row is broadcast everywhere.
pub fn build_tree(depth: usize, branching: &[usize], probs: &[Vec<f64>]) -> Result<TreeSpace> {
    if depth > MAX_DEPTH {
        return Err(Error::Budget { what: "tree depth".into(), value: depth as f64, limit: MAX_DEPTH as f64 });
    }
    if branching.len() != depth && !(branching.len() == 1 && depth > 0) {
        return invalid(format!("branching has {} entries for depth {depth}", branching.len()));
    }
    let branch = |k: usize| if branching.len() == 1 { branching[0] } else { branching[k] };
    let mut leaves = 1f64;
    let mut internal = 0usize;
    for k in 0..depth {
        internal += leaves as usize;
        leaves *= branch(k) as f64;
    }
    if leaves > MAX_LEAVES as f64 {
        return Err(Error::Budget { what: "leaf count".into(), value: leaves, limit: MAX_LEAVES as f64 });
    }
    let per_node = probs.len() == internal && probs.len() > 1;
    if !(probs.len() == 1 || probs.len() == depth || probs.len() == internal) {
        return invalid(format!("probs has {} rows; need 1, {depth} (per depth) or {internal} (per internal node)", probs.len()));
    }
    let mut out = Vec::with_capacity(depth);
    let mut width = 1usize;
    let mut row_base = 0usize;
    for k in 0..depth {
        let b = branch(k);
        let mut nodes = Vec::with_capacity(width * b);
        for p in 0..width {
            let row_idx = if per_node {
                row_base + p
            } else if probs.len() == 1 {
                0
            } else {
                k
            };
            let row = &probs[row_idx];
            if row.len() != b {
                return Err(Error::NonStochastic { row: row_idx, reason: format!("has {} entries for branching {b}", row.len()) });
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL || row.iter().any(|&t| !(t > 0.0)) {
                return Err(Error::NonStochastic { row: row_idx, reason: format!("entries {row:?} sum to {s}") });
            }
            for &t in row {
                nodes.push((p, t));
            }
        }
        row_base += width;
        width *= b;
        out.push(nodes);
    }
    TreeSpace::from_levels(&out)
}

/// Uniform regular tree.
pub fn uniform_tree(depth: usize, branching: usize) -> Result<TreeSpace> {
    let row = vec![1.0 / branching as f64; branching];
    build_tree(depth, &vec![branching; depth], &[row])
}

/// Random tree of the given depth whose nodes have between `min_branch` and
/// `max_branch` children with random transition probabilities bounded below by
/// `0.1 / branching`.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, min_branch: usize, max_branch: usize) -> Result<TreeSpace> {
    let mut out = Vec::with_capacity(depth);
    let mut width = 1usize;
    for _ in 0..depth {
        let mut nodes = Vec::new();
        for p in 0..width {
            let b = rng.random_range(min_branch..=max_branch);
            let raw: Vec<f64> = (0..b).map(|_| 0.1 + rng.random::<f64>()).collect();
            let s: f64 = raw.iter().sum();
            let mut acc = 0.0;
            for (i, r) in raw.iter().enumerate() {
                let t = if i + 1 == b { 1.0 - acc } else { r / s };
                acc += t;
                nodes.push((p, t));
            }
        }
        width = nodes.len();
        out.push(nodes);
    }
    TreeSpace::from_levels(&out)
}

/// A vector-valued adapted process: one value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeProcess {
    pub dim: usize,
    pub values: Vec<f64>,
    pub martingale: bool,
}

impl TreeProcess {
    pub fn new(space: &TreeSpace, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != space.n_nodes() * dim {
            return Err(Error::Dimension(format!("{} values for {} nodes of dimension {dim}", values.len(), space.n_nodes())));
        }
        Ok(TreeProcess { dim, values, martingale: false })
    }

    /// Martingale closed by the given leaf values (`n_leaves * dim` entries).
    pub fn martingale_from_leaves(space: &TreeSpace, leaf_values: &[f64], dim: usize) -> Result<Self> {
        if dim == 0 || leaf_values.len() != space.n_leaves() * dim {
            return Err(Error::Dimension(format!("{} leaf values for {} leaves of dimension {dim}", leaf_values.len(), space.n_leaves())));
        }
        if leaf_values.iter().any(|v| !v.is_finite()) {
            return invalid("leaf values must be finite");
        }
        let n = space.n_nodes();
        let mut values = vec![0.0; n * dim];
        let first_leaf = space.leaf_node(0);
        values[first_leaf * dim..].copy_from_slice(leaf_values);
        for v in (0..first_leaf).rev() {
            for c in space.children(v) {
                let t = space.transition(c);
                for i in 0..dim {
                    values[v * dim + i] += t * values[c * dim + i];
                }
            }
        }
        Ok(TreeProcess { dim, values, martingale: true })
    }

    pub fn value(&self, v: usize) -> &[f64] {
        &self.values[v * self.dim..(v + 1) * self.dim]
    }

    pub fn norm(&self, v: usize) -> f64 {
        norm(self.value(v))
    }

    pub fn leaf_values<'a>(&'a self, space: &TreeSpace) -> &'a [f64] {
        &self.values[space.leaf_node(0) * self.dim..]
    }

    /// Largest deviation from the averaging identity over internal nodes.
    pub fn martingale_defect(&self, space: &TreeSpace) -> f64 {
        let mut worst = 0.0f64;
        for v in 0..space.leaf_node(0) {
            for i in 0..self.dim {
                let avg: f64 = space.children(v).map(|c| space.transition(c) * self.values[c * self.dim + i]).sum();
                worst = worst.max((avg - self.values[v * self.dim + i]).abs());
            }
        }
        worst
    }

    /// Discrete bracket `[X,X]` at every node: `|X_0|^2` plus squared increments along the path.
    pub fn bracket(&self, space: &TreeSpace) -> Vec<f64> {
        let mut out = vec![0.0; space.n_nodes()];
        out[0] = self.norm(0).powi(2);
        for v in 1..space.n_nodes() {
            let p = space.parent(v);
            let d: f64 = (0..self.dim).map(|i| (self.values[v * self.dim + i] - self.values[p * self.dim + i]).powi(2)).sum();
            out[v] = out[p] + d;
        }
        out
    }

    /// Expectation of the closure value.
    pub fn expectation(&self, space: &TreeSpace) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (leaf, &p) in space.leaf_probs().iter().enumerate() {
            let v = space.leaf_node(leaf);
            for i in 0..self.dim {
                out[i] += p * self.values[v * self.dim + i];
            }
        }
        out
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A stopping time given by node markers; a path stops at its first marked node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeStoppingTime {
    pub marked: Vec<bool>,
}

impl TreeStoppingTime {
    pub fn never(space: &TreeSpace) -> Self {
        TreeStoppingTime { marked: vec![false; space.n_nodes()] }
    }

    pub fn from_nodes(space: &TreeSpace, nodes: &[usize]) -> Self {
        let mut t = Self::never(space);
        for &v in nodes {
            t.marked[v] = true;
        }
        t
    }

    pub fn constant(space: &TreeSpace, k: usize) -> Self {
        let nodes: Vec<usize> = space.level_range(k).collect();
        Self::from_nodes(space, &nodes)
    }

    /// For every node, the first marked node on the path from the root to it (inclusive).
    pub fn stopped_at(&self, space: &TreeSpace) -> Vec<Option<usize>> {
        let mut out: Vec<Option<usize>> = vec![None; space.n_nodes()];
        for v in 0..space.n_nodes() {
            let inherited = if v == 0 { None } else { out[space.parent(v)] };
            out[v] = inherited.or(if self.marked[v] { Some(v) } else { None });
        }
        out
    }

    /// Nodes where some path actually stops.
    pub fn stop_nodes(&self, space: &TreeSpace) -> Vec<usize> {
        let at = self.stopped_at(space);
        (0..space.n_nodes()).filter(|&v| at[v] == Some(v)).collect()
    }

    /// Stop node of each leaf, `None` for paths that never stop.
    pub fn leaf_stops(&self, space: &TreeSpace) -> Vec<Option<usize>> {
        let at = self.stopped_at(space);
        (0..space.n_leaves()).map(|l| at[space.leaf_node(l)]).collect()
    }
}

/// `E[f | F_T]` evaluated along the tree: at a node below (or at) the stop node `s`
/// of its path the value is the subtree average at `s`; before stopping it is the
/// plain conditional expectation. The leaf values are therefore `E[f | F_T]`.
pub fn conditional_expectation(space: &TreeSpace, leaf_values: &[f64], dim: usize, stop: &TreeStoppingTime) -> Result<TreeProcess> {
    let m = TreeProcess::martingale_from_leaves(space, leaf_values, dim)?;
    let at = stop.stopped_at(space);
    let mut values = m.values.clone();
    for v in 0..space.n_nodes() {
        if let Some(s) = at[v] {
            if s != v {
                let (src, dst) = (s * dim, v * dim);
                values[dst..dst + dim].copy_from_slice(&m.values[src..src + dim]);
            }
        }
    }
    Ok(TreeProcess { dim, values, martingale: true })
}

fn check_martingale(space: &TreeSpace, x: &TreeProcess) -> Result<()> {
    let defect = x.martingale_defect(space);
    let scale = 1.0 + x.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if defect > 1e-12 * scale {
        return invalid(format!("process is not a martingale (defect {defect:.3e})"));
    }
    Ok(())
}

/// `Y_0 = initial * X_0` and `dY = m_v dX` on every edge leaving node `v`.
pub fn martingale_transform(space: &TreeSpace, x: &TreeProcess, multipliers: &[f64], initial: f64) -> Result<TreeProcess> {
    check_martingale(space, x)?;
    if multipliers.len() != space.n_nodes() {
        return Err(Error::Dimension(format!("{} multipliers for {} nodes", multipliers.len(), space.n_nodes())));
    }
    if initial.abs() > 1.0 {
        return Err(Error::Multiplier { node: 0, value: initial });
    }
    for v in 0..space.leaf_node(0) {
        if !(multipliers[v].abs() <= 1.0) {
            return Err(Error::Multiplier { node: v, value: multipliers[v] });
        }
    }
    let d = x.dim;
    let mut values = vec![0.0; x.values.len()];
    for i in 0..d {
        values[i] = initial * x.values[i];
    }
    for v in 1..space.n_nodes() {
        let p = space.parent(v);
        let m = multipliers[p];
        for i in 0..d {
            values[v * d + i] = values[p * d + i] + m * (x.values[v * d + i] - x.values[p * d + i]);
        }
    }
    Ok(TreeProcess { dim: d, values, martingale: true })
}

/// Scalar `X` into `R^d`: `Y_0 = h_0 X_0`, `dY = h_v dX` with `|h_v| <= 1`.
pub fn vector_transform(space: &TreeSpace, x: &TreeProcess, directions: &[f64], initial: &[f64]) -> Result<TreeProcess> {
    check_martingale(space, x)?;
    if x.dim != 1 {
        return Err(Error::Dimension("vector transform needs a scalar martingale".into()));
    }
    let d = initial.len();
    if d == 0 || directions.len() != space.n_nodes() * d {
        return Err(Error::Dimension(format!("{} direction entries for {} nodes of dimension {d}", directions.len(), space.n_nodes())));
    }
    if norm(initial) > 1.0 + 1e-15 {
        return Err(Error::Multiplier { node: 0, value: norm(initial) });
    }
    for v in 0..space.leaf_node(0) {
        let h = norm(&directions[v * d..(v + 1) * d]);
        if h > 1.0 + 1e-15 {
            return Err(Error::Multiplier { node: v, value: h });
        }
    }
    let mut values = vec![0.0; space.n_nodes() * d];
    for i in 0..d {
        values[i] = initial[i] * x.values[0];
    }
    for v in 1..space.n_nodes() {
        let p = space.parent(v);
        let dx = x.values[v] - x.values[p];
        for i in 0..d {
            values[v * d + i] = values[p * d + i] + directions[p * d + i] * dx;
        }
    }
    Ok(TreeProcess { dim: d, values, martingale: true })
}

/// Number of stopping times that only look at depths `<= max_depth`, counting the
/// never-stopping one. A node at the depth cap can be marked or not; above it a
/// stopping time either stops at the node or combines one choice per child.
pub fn count_stopping_times(space: &TreeSpace, max_depth: usize) -> f64 {
    let cap = max_depth.min(space.levels());
    let mut count = vec![0.0f64; space.n_nodes()];
    for v in (0..space.n_nodes()).rev() {
        count[v] = if space.level(v) >= cap { 2.0 } else { 1.0 + space.children(v).map(|c| count[c]).product::<f64>() };
    }
    count[0]
}

/// Visits every stopping time (as its list of stop nodes) looking at depths `<= max_depth`.
pub fn for_each_stopping_time<F: FnMut(&[usize])>(space: &TreeSpace, max_depth: usize, mut visit: F) -> Result<usize> {
    let count = count_stopping_times(space, max_depth);
    if count > MAX_STOPPING_TIMES {
        return Err(Error::Budget {
            what: "stopping-time count; use sample_stopping_times for a lower bound".into(),
            value: count,
            limit: MAX_STOPPING_TIMES,
        });
    }
    let cap = max_depth.min(space.levels());
    let mut chosen = Vec::new();
    let mut visited = 0usize;
    fn rec<F: FnMut(&[usize])>(space: &TreeSpace, cap: usize, frontier: Vec<usize>, chosen: &mut Vec<usize>, visit: &mut F, visited: &mut usize) {
        let Some((&v, rest)) = frontier.split_first() else {
            visit(chosen);
            *visited += 1;
            return;
        };
        chosen.push(v);
        rec(space, cap, rest.to_vec(), chosen, visit, visited);
        chosen.pop();
        let mut next: Vec<usize> = if space.level(v) < cap { space.children(v).collect() } else { Vec::new() };
        next.extend_from_slice(rest);
        rec(space, cap, next, chosen, visit, visited);
    }
    rec(space, cap, vec![0], &mut chosen, &mut visit, &mut visited);
    Ok(visited)
}

/// Complete list of stopping times looking at depths `<= max_depth`.
pub fn enumerate_stopping_times(space: &TreeSpace, max_depth: usize) -> Result<Vec<TreeStoppingTime>> {
    let mut out = Vec::new();
    for_each_stopping_time(space, max_depth, |nodes| out.push(TreeStoppingTime::from_nodes(space, nodes)))?;
    Ok(out)
}

/// Randomized subset used when enumeration exceeds its budget: all constant-level
/// times, the never-stopping time, and `count` random antichains.
pub fn sample_stopping_times(space: &TreeSpace, max_depth: usize, count: usize, seed: u64) -> Vec<TreeStoppingTime> {
    let cap = max_depth.min(space.levels());
    let mut out: Vec<TreeStoppingTime> = (0..=cap).map(|k| TreeStoppingTime::constant(space, k)).collect();
    out.push(TreeStoppingTime::never(space));
    let mut rng = crate::rng::substream(seed, 0);
    for _ in 0..count {
        let q: f64 = rng.random();
        let mut marked = vec![false; space.n_nodes()];
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            if rng.random::<f64>() < q {
                marked[v] = true;
            } else if space.level(v) < cap {
                stack.extend(space.children(v));
            }
        }
        out.push(TreeStoppingTime { marked });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn skewed() -> TreeSpace {
        build_tree(2, &[2, 2], &[vec![0.3, 0.7], vec![0.5, 0.5], vec![0.2, 0.8]]).unwrap()
    }

    #[test]
    fn coin_and_product_trees() {
        let coin = build_tree(1, &[2], &[vec![0.5, 0.5]]).unwrap();
        assert_eq!(coin.leaf_probs(), &[0.5, 0.5]);
        let t = uniform_tree(2, 2).unwrap();
        assert_eq!(t.leaf_probs(), &[0.25; 4]);
    }

    #[test]
    fn skewed_tree_leaf_products() {
        let t = skewed();
        let expected = [0.15, 0.15, 0.14, 0.56];
        for (a, b) in t.leaf_probs().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn rejects_bad_rows_and_budget() {
        match build_tree(1, &[2], &[vec![0.5, 0.6]]) {
            Err(Error::NonStochastic { row, .. }) => assert_eq!(row, 0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(build_tree(2, &[2, 2], &[vec![0.5, 0.5], vec![0.5, 0.5], vec![1.5, -0.5]]), Err(Error::NonStochastic { row: 2, .. })));
        assert!(matches!(build_tree(13, &[2], &[vec![0.5, 0.5]]), Err(Error::Budget { .. })));
        assert!(matches!(build_tree(11, &[4], &[vec![0.25; 4]]), Err(Error::Budget { .. })));
    }

    #[test]
    fn text_round_trip() {
        let t = skewed();
        let back = TreeSpace::parse_text(&t.to_text()).unwrap();
        assert_eq!(t, back);
        assert!(matches!(TreeSpace::parse_text("0 - 1\n1 0 0.4\n1 0 0.5\n"), Err(Error::NonStochastic { .. })));
        assert!(matches!(TreeSpace::parse_text("1 0 1\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn conditional_expectation_examples() {
        let coin = uniform_tree(1, 2).unwrap();
        let root = TreeStoppingTime::constant(&coin, 0);
        let ce = conditional_expectation(&coin, &[2.0, 0.0], 1, &root).unwrap();
        assert_eq!(ce.value(0), &[1.0]);
        assert_eq!(ce.leaf_values(&coin), &[1.0, 1.0]);

        let t = skewed();
        let lvl1 = TreeStoppingTime::constant(&t, 1);
        let ce = conditional_expectation(&t, &[1.0, 2.0, 3.0, 4.0], 1, &lvl1).unwrap();
        assert_abs_diff_eq!(ce.value(1)[0], 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(ce.value(2)[0], 3.8, epsilon = 1e-15);
        assert_abs_diff_eq!(ce.leaf_values(&t)[2], 3.8, epsilon = 1e-15);
    }

    #[test]
    fn stopping_time_counts() {
        let coin = uniform_tree(1, 2).unwrap();
        let all = enumerate_stopping_times(&coin, 1).unwrap();
        assert_eq!(all.len(), 5);
        let trivial = TreeSpace::from_levels(&[]).unwrap();
        assert_eq!(enumerate_stopping_times(&trivial, 0).unwrap().len(), 2);
        let d2 = uniform_tree(2, 2).unwrap();
        assert_eq!(count_stopping_times(&d2, 2), 26.0);
        assert_eq!(enumerate_stopping_times(&d2, 2).unwrap().len(), 26);
        let d5 = uniform_tree(5, 2).unwrap();
        assert!(matches!(enumerate_stopping_times(&d5, 5), Err(Error::Budget { .. })));
        assert!(sample_stopping_times(&d5, 5, 100, 1).len() == 100 + 7);
    }

    #[test]
    fn transform_rejects_large_multiplier() {
        let t = uniform_tree(2, 2).unwrap();
        let x = TreeProcess::martingale_from_leaves(&t, &[1.0, 2.0, 3.0, 4.0], 1).unwrap();
        let mut m = vec![1.0; t.n_nodes()];
        m[1] = 1.5;
        assert!(matches!(martingale_transform(&t, &x, &m, 1.0), Err(Error::Multiplier { node: 1, .. })));
        let flip = martingale_transform(&t, &x, &vec![-1.0; t.n_nodes()], -1.0).unwrap();
        for (a, b) in flip.values.iter().zip(&x.values) {
            assert_eq!(*a, -b);
        }
    }
}
