//! Discretized càdlàg paths on a uniform grid: generation, brackets, maximal
//! functions, jumps and differential subordination checks.

use crate::error::{invalid, Error, Result};
use crate::rng::{substream, PathRng};
use crate::treespace::norm;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

pub const MAX_STEPS: usize = 10_000_000;
pub const MAX_EXPECTED_JUMPS: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_max: f64,
    pub dt: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_max >= 0.0) || !t_max.is_finite() {
            return invalid(format!("grid needs dt > 0 and finite t_max >= 0 (dt={dt}, t_max={t_max})"));
        }
        let ratio = t_max / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return invalid(format!("t_max/dt = {ratio} is not an integer"));
        }
        if steps > MAX_STEPS as f64 {
            return Err(Error::Budget { what: "grid steps".into(), value: steps, limit: MAX_STEPS as f64 });
        }
        Ok(TimeGrid { t_max, dt, steps: steps as usize })
    }

    /// Number of steps; the grid has `steps() + 1` points.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump {
    pub index: usize,
    /// Left limit at `index`; the recorded value there is the post-jump value.
    pub left: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    pub grid: TimeGrid,
    pub dim: usize,
    pub values: Vec<f64>,
    pub jumps: Vec<Jump>,
}

/// Kind of a skeleton step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Continuous,
    Jump,
}

/// The path read as a discrete sequence in which every left limit is an extra
/// point, so each step is either a pure grid increment or a pure jump.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub dim: usize,
    pub points: Vec<f64>,
    /// `kinds[i]` and `grid_index[i]` describe the step ending at point `i + 1`.
    pub kinds: Vec<StepKind>,
    pub grid_index: Vec<usize>,
}

impl Skeleton {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

impl CadlagPath {
    pub fn from_values(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != (grid.steps() + 1) * dim {
            return Err(Error::Dimension(format!("{} values for {} points of dimension {dim}", values.len(), grid.steps() + 1)));
        }
        Ok(CadlagPath { grid, dim, values, jumps: Vec::new() })
    }

    pub fn with_jumps(mut self, jumps: Vec<Jump>) -> Result<Self> {
        for w in jumps.windows(2) {
            if w[1].index <= w[0].index {
                return invalid("jump indices must be strictly increasing");
            }
        }
        for j in &jumps {
            if j.index == 0 || j.index > self.grid.steps() || j.left.len() != self.dim {
                return invalid(format!("malformed jump at index {}", j.index));
            }
        }
        self.jumps = jumps;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.grid.steps() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn jump_at(&self, k: usize) -> Option<&Jump> {
        self.jumps.binary_search_by_key(&k, |j| j.index).ok().map(|i| &self.jumps[i])
    }

    pub fn left_limit(&self, k: usize) -> &[f64] {
        match self.jump_at(k) {
            Some(j) => &j.left,
            None => self.value(k),
        }
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.grid.steps())
    }

    pub fn skeleton(&self) -> Skeleton {
        joint_skeleton(&[self]).remove(0)
    }
}

/// Skeletons of several paths on a common grid, aligned on the union of their jump
/// indices (a path without a jump at such an index gets a zero jump step).
pub fn joint_skeleton(paths: &[&CadlagPath]) -> Vec<Skeleton> {
    let n = paths[0].grid.steps();
    let mut jump_idx: Vec<usize> = paths.iter().flat_map(|p| p.jumps.iter().map(|j| j.index)).collect();
    jump_idx.sort_unstable();
    jump_idx.dedup();
    let mut out: Vec<Skeleton> = paths
        .iter()
        .map(|p| Skeleton { dim: p.dim, points: p.value(0).to_vec(), kinds: Vec::new(), grid_index: Vec::new() })
        .collect();
    let mut next = 0usize;
    for k in 1..=n {
        let is_jump = next < jump_idx.len() && jump_idx[next] == k;
        for (s, p) in out.iter_mut().zip(paths) {
            if is_jump {
                s.points.extend_from_slice(p.left_limit(k));
                s.kinds.push(StepKind::Continuous);
                s.grid_index.push(k);
                s.points.extend_from_slice(p.value(k));
                s.kinds.push(StepKind::Jump);
                s.grid_index.push(k);
            } else {
                s.points.extend_from_slice(p.value(k));
                s.kinds.push(StepKind::Continuous);
                s.grid_index.push(k);
            }
        }
        if is_jump {
            next += 1;
        }
    }
    out
}

/// Path identically equal to `value`.
pub fn constant_path(grid: TimeGrid, value: &[f64]) -> CadlagPath {
    let values = value.iter().copied().cycle().take(value.len() * (grid.steps() + 1)).collect();
    CadlagPath { grid, dim: value.len(), values, jumps: Vec::new() }
}

/// Brownian motion from the origin with `variance_rate * dt` increment variance per coordinate.
pub fn simulate_brownian(grid: TimeGrid, dim: usize, variance_rate: f64, seed: u64) -> Result<CadlagPath> {
    simulate_brownian_from(grid, &vec![0.0; dim], variance_rate, &mut substream(seed, 0))
}

pub fn simulate_brownian_from(grid: TimeGrid, x0: &[f64], variance_rate: f64, rng: &mut PathRng) -> Result<CadlagPath> {
    if x0.is_empty() {
        return invalid("dimension must be at least 1");
    }
    if !(variance_rate > 0.0) {
        return invalid(format!("variance rate must be positive, got {variance_rate}; use constant_path for a deterministic path"));
    }
    let d = x0.len();
    let sd = (variance_rate * grid.dt).sqrt();
    let mut values = Vec::with_capacity((grid.steps() + 1) * d);
    values.extend_from_slice(x0);
    for k in 1..=grid.steps() {
        for i in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            let prev = values[(k - 1) * d + i];
            values.push(prev + sd * z);
        }
    }
    Ok(CadlagPath { grid, dim: d, values, jumps: Vec::new() })
}

/// Ornstein–Uhlenbeck paths for the generator `Δ − x·∇`, sampled with the exact transition.
pub fn simulate_ou(grid: TimeGrid, x0: &[f64], rng: &mut PathRng) -> CadlagPath {
    let d = x0.len();
    let decay = (-grid.dt).exp();
    let sd = (1.0 - decay * decay).sqrt();
    let mut values = Vec::with_capacity((grid.steps() + 1) * d);
    values.extend_from_slice(x0);
    for k in 1..=grid.steps() {
        for i in 0..d {
            let z: f64 = StandardNormal.sample(rng);
            let prev = values[(k - 1) * d + i];
            values.push(decay * prev + sd * z);
        }
    }
    CadlagPath { grid, dim: d, values, jumps: Vec::new() }
}

/// Bessel-type diffusion for the generator `d²/dx² + (2α/x) d/dx` by Euler–Maruyama,
/// reflected at the origin.
pub fn simulate_bessel(grid: TimeGrid, alpha: f64, x0: f64, rng: &mut PathRng) -> Result<CadlagPath> {
    if !(alpha >= 0.0) || !(x0 > 0.0) {
        return invalid("Bessel driver needs alpha >= 0 and x0 > 0");
    }
    let sd = (2.0 * grid.dt).sqrt();
    let floor = (grid.dt).sqrt() * 1e-3;
    let mut values = Vec::with_capacity(grid.steps() + 1);
    values.push(x0);
    let mut x = x0;
    for _ in 0..grid.steps() {
        let z: f64 = StandardNormal.sample(rng);
        x = (x + 2.0 * alpha / x.max(floor) * grid.dt + sd * z).abs();
        values.push(x);
    }
    Ok(CadlagPath { grid, dim: 1, values, jumps: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BracketPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `[X,X]` on the grid: `|X_0|^2` plus squared continuous increments and squared jumps.
pub fn quadratic_variation(path: &CadlagPath) -> BracketPath {
    let (cont, jumps) = bracket_parts(path);
    let values = cont.iter().zip(&jumps).map(|(c, j)| c + j).collect();
    BracketPath { grid: path.grid, values }
}

/// Continuous part (including `|X_0|^2`) and running sum of squared jumps, separately.
pub fn bracket_parts(path: &CadlagPath) -> (Vec<f64>, Vec<f64>) {
    let n = path.grid.steps();
    let mut cont = Vec::with_capacity(n + 1);
    let mut jumps = Vec::with_capacity(n + 1);
    cont.push(norm(path.value(0)).powi(2));
    jumps.push(0.0);
    for k in 1..=n {
        let left = path.left_limit(k);
        cont.push(cont[k - 1] + sq_dist(left, path.value(k - 1)));
        jumps.push(jumps[k - 1] + sq_dist(path.value(k), left));
    }
    (cont, jumps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubordinationReport {
    pub ok: bool,
    /// Largest amount by which the bracket difference or one of its increments went negative.
    pub worst_violation: f64,
    pub worst_time: f64,
    pub worst_index: usize,
}

/// Checks that `[X,X] − [Y,Y]` is nonnegative and nondecreasing along the joint
/// skeleton. With `tol = None` the slack is `1e-9 (1 + bracket)`.
pub fn check_differential_subordination(x: &CadlagPath, y: &CadlagPath, tol: Option<f64>) -> Result<SubordinationReport> {
    if x.grid != y.grid {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", x.grid, y.grid)));
    }
    let sk = joint_skeleton(&[x, y]);
    let (sx, sy) = (&sk[0], &sk[1]);
    let mut bx = norm(sx.point(0)).powi(2);
    let mut by = norm(sy.point(0)).powi(2);
    let slack = |b: f64| tol.unwrap_or(1e-9 * (1.0 + b));
    let mut worst = (bx - by).min(0.0).abs();
    let mut ok = bx - by >= -slack(bx);
    let mut at = 0usize;
    for i in 1..sx.len() {
        let dx = sq_dist(sx.point(i), sx.point(i - 1));
        let dy = sq_dist(sy.point(i), sy.point(i - 1));
        bx += dx;
        by += dy;
        let s = slack(bx);
        for v in [dx - dy, bx - by] {
            if v < -s {
                ok = false;
            }
            if -v > worst {
                worst = -v;
                at = i;
            }
        }
    }
    let worst_index = if at == 0 { 0 } else { sx.grid_index[at - 1] };
    Ok(SubordinationReport { ok, worst_violation: worst, worst_time: x.grid.time(worst_index), worst_index })
}

/// `sup_t |X_t|` over grid values and stored left limits.
pub fn maximal_function(path: &CadlagPath) -> f64 {
    let mut m = (0..path.len()).map(|k| norm(path.value(k))).fold(0.0, f64::max);
    for j in &path.jumps {
        m = m.max(norm(&j.left));
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeLaw {
    /// Independent centered normals per coordinate.
    Normal { sd: f64 },
    /// Fixed size, uniformly random sign per coordinate.
    Rademacher { size: f64 },
    /// Uniform on `[-half_width, half_width]` per coordinate.
    Uniform { half_width: f64 },
}

impl AmplitudeLaw {
    fn sample<R: Rng>(&self, rng: &mut R, dim: usize) -> Vec<f64> {
        (0..dim)
            .map(|_| match *self {
                AmplitudeLaw::Normal { sd } => {
                    let z: f64 = StandardNormal.sample(rng);
                    sd * z
                }
                AmplitudeLaw::Rademacher { size } => {
                    if rng.random::<bool>() {
                        size
                    } else {
                        -size
                    }
                }
                AmplitudeLaw::Uniform { half_width } => half_width * (2.0 * rng.random::<f64>() - 1.0),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpSpec {
    pub rate: f64,
    pub amplitude: AmplitudeLaw,
    pub subordination_cap: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct JumpDiagnostics {
    pub placed: usize,
    /// Jumps moved to a neighboring free grid index after a collision.
    pub relocated: usize,
    /// Jumps dropped because no free index was left.
    pub dropped: usize,
    /// Pair jumps whose `Y` amplitude was clipped to `|ΔX|`.
    pub clipped: usize,
}

fn jump_indices<R: Rng>(grid: TimeGrid, rate: f64, taken: &[usize], rng: &mut R, diag: &mut JumpDiagnostics) -> Result<Vec<usize>> {
    let n = grid.steps();
    let mean = rate * grid.t_max;
    if !(rate >= 0.0) {
        return invalid(format!("jump rate must be nonnegative, got {rate}"));
    }
    if mean > MAX_EXPECTED_JUMPS {
        return Err(Error::Budget { what: "expected jump count".into(), value: mean, limit: MAX_EXPECTED_JUMPS });
    }
    if mean == 0.0 || n == 0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean).map_err(|e| Error::Invalid(e.to_string()))?.sample(rng) as usize;
    let mut used = vec![false; n + 1];
    for &k in taken {
        used[k] = true;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let t: f64 = rng.random::<f64>() * grid.t_max;
        let k0 = ((t / grid.dt).ceil() as usize).clamp(1, n);
        let mut found = None;
        for off in 0..n {
            let cands = [k0.checked_add(off), k0.checked_sub(off)];
            for k in cands.into_iter().flatten() {
                if (1..=n).contains(&k) && !used[k] {
                    found = Some(k);
                    break;
                }
            }
            if found.is_some() {
                break;
            }
        }
        match found {
            Some(k) => {
                if k != k0 {
                    diag.relocated += 1;
                }
                used[k] = true;
                out.push(k);
            }
            None => diag.dropped += 1,
        }
    }
    diag.placed = out.len();
    Ok(out)
}

/// Adds a jump of the given amplitude at each `(index, amplitude)` and returns the new path.
fn apply_jumps(path: &CadlagPath, mut new: Vec<(usize, Vec<f64>)>) -> CadlagPath {
    new.sort_by_key(|(k, _)| *k);
    let d = path.dim;
    let mut offset = vec![0.0; d];
    let mut values = path.values.clone();
    let mut jumps = Vec::with_capacity(path.jumps.len() + new.len());
    let mut ni = 0usize;
    for k in 1..=path.grid.steps() {
        let old_left = path.left_limit(k).to_vec();
        let had_jump = path.jump_at(k).is_some();
        let left: Vec<f64> = old_left.iter().zip(&offset).map(|(a, o)| a + o).collect();
        if ni < new.len() && new[ni].0 == k {
            for i in 0..d {
                offset[i] += new[ni].1[i];
            }
            ni += 1;
            jumps.push(Jump { index: k, left });
        } else if had_jump {
            jumps.push(Jump { index: k, left });
        }
        for i in 0..d {
            values[k * d + i] += offset[i];
        }
    }
    CadlagPath { grid: path.grid, dim: d, values, jumps }
}

/// Compound-Poisson jumps on grid points. Indices already carrying a jump are avoided.
pub fn inject_jumps(path: &CadlagPath, spec: &JumpSpec, seed: u64) -> Result<(CadlagPath, JumpDiagnostics)> {
    inject_jumps_with(path, spec, &mut substream(seed, 0))
}

pub fn inject_jumps_with(path: &CadlagPath, spec: &JumpSpec, rng: &mut PathRng) -> Result<(CadlagPath, JumpDiagnostics)> {
    let mut diag = JumpDiagnostics::default();
    let taken: Vec<usize> = path.jumps.iter().map(|j| j.index).collect();
    let idx = jump_indices(path.grid, spec.rate, &taken, rng, &mut diag)?;
    let new = idx.into_iter().map(|k| (k, spec.amplitude.sample(rng, path.dim))).collect();
    Ok((apply_jumps(path, new), diag))
}

/// Shared jump times for a pair; `Y` amplitudes are drawn independently and, with
/// the cap on, scaled down to `|ΔX|` whenever they exceed it.
pub fn inject_jumps_pair(x: &CadlagPath, y: &CadlagPath, spec: &JumpSpec, rng: &mut PathRng) -> Result<(CadlagPath, CadlagPath, JumpDiagnostics)> {
    if x.grid != y.grid {
        return Err(Error::GridMismatch("pair paths live on different grids".into()));
    }
    let mut diag = JumpDiagnostics::default();
    let mut taken: Vec<usize> = x.jumps.iter().chain(&y.jumps).map(|j| j.index).collect();
    taken.sort_unstable();
    taken.dedup();
    let idx = jump_indices(x.grid, spec.rate, &taken, rng, &mut diag)?;
    let mut nx = Vec::with_capacity(idx.len());
    let mut ny = Vec::with_capacity(idx.len());
    for k in idx {
        let a = spec.amplitude.sample(rng, x.dim);
        let mut b = spec.amplitude.sample(rng, y.dim);
        if spec.subordination_cap {
            let (na, nb) = (norm(&a), norm(&b));
            if nb > na {
                let s = if nb > 0.0 { na / nb } else { 0.0 };
                b.iter_mut().for_each(|v| *v *= s);
                diag.clipped += 1;
            }
        }
        nx.push((k, a));
        ny.push((k, b));
    }
    Ok((apply_jumps(x, nx), apply_jumps(y, ny), diag))
}

/// `Y_0 = m_0 X_0` and `ΔY = m ΔX` with a fresh multiplier uniform in `[-1, 1]` for
/// every continuous step and every jump.
pub fn subordinate_transform(x: &CadlagPath, rng: &mut PathRng) -> CadlagPath {
    let d = x.dim;
    let n = x.grid.steps();
    let m0 = 2.0 * rng.random::<f64>() - 1.0;
    let mut values = Vec::with_capacity(x.values.len());
    values.extend(x.value(0).iter().map(|v| m0 * v));
    let mut jumps = Vec::with_capacity(x.jumps.len());
    for k in 1..=n {
        let m = 2.0 * rng.random::<f64>() - 1.0;
        let left: Vec<f64> = (0..d).map(|i| values[(k - 1) * d + i] + m * (x.left_limit(k)[i] - x.value(k - 1)[i])).collect();
        if x.jump_at(k).is_some() {
            let mj = 2.0 * rng.random::<f64>() - 1.0;
            for i in 0..d {
                values.push(left[i] + mj * (x.value(k)[i] - x.left_limit(k)[i]));
            }
            jumps.push(Jump { index: k, left });
        } else {
            values.extend_from_slice(&left);
        }
    }
    CadlagPath { grid: x.grid, dim: d, values, jumps }
}

/// Columnar text dump: `path,time,jump,v0,v1,...`; a jump contributes a row with
/// flag `-1` holding the left limit before the post-jump row with flag `1`.
pub fn dump_paths(paths: &[&CadlagPath]) -> String {
    let mut s = String::new();
    let dim = paths.iter().map(|p| p.dim).max().unwrap_or(1);
    s.push_str("path,time,jump");
    for i in 0..dim {
        s.push_str(&format!(",v{i}"));
    }
    s.push('\n');
    for (id, p) in paths.iter().enumerate() {
        let row = |s: &mut String, k: usize, flag: i32, v: &[f64]| {
            s.push_str(&format!("{id},{},{flag}", p.grid.time(k)));
            for x in v {
                s.push_str(&format!(",{x}"));
            }
            s.push('\n');
        };
        for k in 0..p.len() {
            if let Some(j) = p.jump_at(k) {
                row(&mut s, k, -1, &j.left);
                row(&mut s, k, 1, p.value(k));
            } else {
                row(&mut s, k, 0, p.value(k));
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> TimeGrid {
        TimeGrid::new(n as f64, 1.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 0.0).is_err());
        assert!(TimeGrid::new(1.0, 0.3).is_err());
        assert!(TimeGrid::new(1e8, 1.0).is_err());
        assert_eq!(TimeGrid::new(1.0, 1e-3).unwrap().steps(), 1000);
    }

    #[test]
    fn bracket_of_linear_path() {
        let p = CadlagPath::from_values(unit_grid(3), 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(quadratic_variation(&p).values, vec![0.0, 1.0, 2.0, 3.0]);
        let c = constant_path(unit_grid(3), &[2.0]);
        assert_eq!(quadratic_variation(&c).values, vec![4.0; 4]);
    }

    #[test]
    fn maximal_function_sees_left_limits() {
        let p = CadlagPath::from_values(unit_grid(2), 1, vec![0.0, 3.0, -1.0]).unwrap();
        assert_eq!(maximal_function(&p), 3.0);
        let q = p.with_jumps(vec![Jump { index: 2, left: vec![5.0] }]).unwrap();
        assert_eq!(maximal_function(&q), 5.0);
    }

    #[test]
    fn rejects_zero_variance() {
        assert!(simulate_brownian(unit_grid(3), 1, 0.0, 1).is_err());
        let a = simulate_brownian(unit_grid(50), 2, 2.0, 9).unwrap();
        let b = simulate_brownian(unit_grid(50), 2, 2.0, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subordination_examples() {
        let x = simulate_brownian(TimeGrid::new(1.0, 0.01).unwrap(), 1, 1.0, 3).unwrap();
        let r = check_differential_subordination(&x, &x, None).unwrap();
        assert!(r.ok);
        assert_eq!(r.worst_violation, 0.0);
        let mut y = x.clone();
        y.values.iter_mut().for_each(|v| *v *= 2.0);
        assert!(!check_differential_subordination(&x, &y, None).unwrap().ok);
        let other = simulate_brownian(TimeGrid::new(2.0, 0.01).unwrap(), 1, 1.0, 3).unwrap();
        assert!(matches!(check_differential_subordination(&x, &other, None), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn zero_rate_leaves_path_unchanged() {
        let x = simulate_brownian(TimeGrid::new(1.0, 0.01).unwrap(), 1, 1.0, 3).unwrap();
        let spec = JumpSpec { rate: 0.0, amplitude: AmplitudeLaw::Normal { sd: 1.0 }, subordination_cap: false };
        let (y, d) = inject_jumps(&x, &spec, 4).unwrap();
        assert_eq!(x, y);
        assert_eq!(d.placed, 0);
    }

    #[test]
    fn dense_jumps_relocate_or_drop() {
        let x = constant_path(unit_grid(5), &[0.0]);
        let spec = JumpSpec { rate: 20.0, amplitude: AmplitudeLaw::Rademacher { size: 1.0 }, subordination_cap: false };
        let (y, d) = inject_jumps(&x, &spec, 1).unwrap();
        assert_eq!(y.jumps.len(), d.placed);
        assert!(d.placed <= 5);
        assert!(d.relocated + d.dropped > 0);
    }
}
