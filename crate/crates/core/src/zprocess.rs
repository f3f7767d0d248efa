//! The process `Z` solving `dZ = (V − aI) Z dt + dY`, the submartingale `X̃ = X + A`,
//! the Bellman functions of the weak-type estimate, and sparse families for `Z`.

use crate::error::{invalid, Error, Result};
use crate::paths::{check_differential_subordination, joint_skeleton, CadlagPath, Jump, Skeleton, StepKind, TimeGrid};
use crate::rng::PathRng;
use crate::sparse::{Provenance, Stop, StoppingFamily};
use crate::treespace::{norm, TreeProcess, TreeSpace};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SYM_TOL: f64 = 1e-9;

/// Source of the curvature matrices `V_k` (one per grid step).
#[derive(Debug, Clone, PartialEq)]
pub enum VSource {
    /// `V = c I` with `c <= 0`.
    ScaledIdentity(f64),
    Constant(DMatrix<f64>),
    /// `V_k` for the step from grid point `k` to `k + 1`.
    PerStep(Vec<DMatrix<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    pub a: f64,
    pub dim: usize,
    pub v: VSource,
}

fn check_matrix(m: &DMatrix<f64>, dim: usize) -> Result<f64> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Dimension(format!("V is {}x{}, expected {dim}x{dim}", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).abs().max();
    if asym > SYM_TOL {
        return invalid(format!("V is not symmetric (defect {asym:.3e})"));
    }
    let eig = SymmetricEigen::new(0.5 * (m + m.transpose())).eigenvalues;
    let top = eig.max();
    if top > SYM_TOL {
        return invalid(format!("V is not negative semidefinite (largest eigenvalue {top:.3e})"));
    }
    Ok(eig.iter().fold(0.0f64, |a, e| a.max(e.abs())))
}

impl DriftSpec {
    pub fn new(a: f64, dim: usize, v: VSource) -> Result<Self> {
        if !(a >= 0.0) {
            return invalid(format!("curvature bound a must be nonnegative, got {a}"));
        }
        let spec = DriftSpec { a, dim, v };
        spec.spectral_radius()?;
        Ok(spec)
    }

    pub fn zero(dim: usize) -> Self {
        DriftSpec { a: 0.0, dim, v: VSource::ScaledIdentity(0.0) }
    }

    /// `V = −I`: the Ornstein–Uhlenbeck (Gauss) geometry.
    pub fn gauss(dim: usize, a: f64) -> Result<Self> {
        Self::new(a, dim, VSource::ScaledIdentity(-1.0))
    }

    /// `V_k = f(state_k)` along a driver path.
    pub fn from_state<F: Fn(&[f64]) -> DMatrix<f64>>(a: f64, dim: usize, driver: &CadlagPath, f: F) -> Result<Self> {
        let mats = (0..driver.grid.steps()).map(|k| f(driver.value(k))).collect();
        Self::new(a, dim, VSource::PerStep(mats))
    }

    /// `V = −2α/x²` along a Bessel driver, with `x` floored at `sqrt(4 α dt)` so that
    /// the explicit step stays stable. Returns the spec and the number of floored steps.
    pub fn bessel(alpha: f64, driver: &CadlagPath) -> Result<(Self, usize)> {
        let floor = (4.0 * alpha * driver.grid.dt).sqrt();
        let mut floored = 0usize;
        let mats = (0..driver.grid.steps())
            .map(|k| {
                let x = driver.value(k)[0];
                if x < floor {
                    floored += 1;
                }
                let x = x.max(floor);
                let v = if alpha == 0.0 { 0.0 } else { -2.0 * alpha / (x * x) };
                DMatrix::from_element(1, 1, v)
            })
            .collect();
        Ok((Self::new(0.0, 1, VSource::PerStep(mats))?, floored))
    }

    /// Largest `|eig V|` over all steps, validating symmetry and sign on the way.
    pub fn spectral_radius(&self) -> Result<f64> {
        match &self.v {
            VSource::ScaledIdentity(c) => {
                if *c > SYM_TOL {
                    return invalid(format!("V = {c} I is not negative semidefinite"));
                }
                Ok(c.abs())
            }
            VSource::Constant(m) => check_matrix(m, self.dim),
            VSource::PerStep(ms) => ms.iter().try_fold(0.0f64, |acc, m| Ok(acc.max(check_matrix(m, self.dim)?))),
        }
    }

    /// Rejects `dt` unless `dt (a + max|eig V|) < 1`.
    pub fn check_stability(&self, dt: f64) -> Result<()> {
        let rate = self.a + self.spectral_radius()?;
        if rate > 0.0 && dt * rate >= 1.0 {
            return Err(Error::Unstable { dt, required_dt: 1.0 / rate });
        }
        Ok(())
    }

    /// `z ← (I + (V_k − aI) dt) z`.
    pub fn propagate(&self, k: usize, dt: f64, z: &mut [f64]) {
        match &self.v {
            VSource::ScaledIdentity(c) => {
                let f = 1.0 + (c - self.a) * dt;
                z.iter_mut().for_each(|v| *v *= f);
            }
            VSource::Constant(m) => apply(m, self.a, dt, z),
            VSource::PerStep(ms) => apply(&ms[k.min(ms.len().saturating_sub(1))], self.a, dt, z),
        }
    }
}

fn apply(m: &DMatrix<f64>, a: f64, dt: f64, z: &mut [f64]) {
    let d = z.len();
    let old = z.to_vec();
    for i in 0..d {
        let mut s = old[i] * (1.0 - a * dt);
        for j in 0..d {
            s += m[(i, j)] * old[j] * dt;
        }
        z[i] = s;
    }
}

/// `Z` together with its driver and drift.
#[derive(Debug, Clone, PartialEq)]
pub struct ZPath {
    pub z: CadlagPath,
    pub y: CadlagPath,
    pub drift: DriftSpec,
}

/// Explicit Euler: `Z_{k+1} = Z_k + (V_k − aI) Z_k dt + ΔY_{k+1}`, with jumps of `Y`
/// added atomically after the drift step.
pub fn evolve_z(y: &CadlagPath, drift: &DriftSpec, z0: &[f64]) -> Result<ZPath> {
    if z0.len() != y.dim || drift.dim != y.dim {
        return Err(Error::Dimension(format!("driver dimension {}, drift {}, z0 {}", y.dim, drift.dim, z0.len())));
    }
    drift.check_stability(y.grid.dt)?;
    let d = y.dim;
    let dt = y.grid.dt;
    let mut values = Vec::with_capacity(y.values.len());
    values.extend_from_slice(z0);
    let mut jumps = Vec::with_capacity(y.jumps.len());
    let mut z = z0.to_vec();
    for k in 1..=y.grid.steps() {
        drift.propagate(k - 1, dt, &mut z);
        let (yl, yp) = (y.left_limit(k), y.value(k - 1));
        for i in 0..d {
            z[i] += yl[i] - yp[i];
        }
        if y.jump_at(k).is_some() {
            let left = z.clone();
            let yk = y.value(k);
            for i in 0..d {
                z[i] += yk[i] - yl[i];
            }
            jumps.push(Jump { index: k, left });
        }
        values.extend_from_slice(&z);
    }
    Ok(ZPath { z: CadlagPath { grid: y.grid, dim: d, values, jumps }, y: y.clone(), drift: drift.clone() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormDecayReport {
    pub ok: bool,
    pub worst_increase: f64,
    pub step: Option<usize>,
    pub final_norm: f64,
}

/// Homogeneous evolution from `z0`; `|W|` must not increase by more than 1e-9 relative per step.
pub fn norm_decay_check(drift: &DriftSpec, z0: &[f64], grid: TimeGrid) -> Result<NormDecayReport> {
    drift.check_stability(grid.dt)?;
    let mut w = z0.to_vec();
    let mut prev = norm(&w);
    let mut rep = NormDecayReport { ok: true, worst_increase: 0.0, step: None, final_norm: prev };
    for k in 0..grid.steps() {
        drift.propagate(k, grid.dt, &mut w);
        let cur = norm(&w);
        let inc = cur - prev;
        if inc > rep.worst_increase {
            rep.worst_increase = inc;
        }
        if inc > 1e-9 * prev.max(f64::MIN_POSITIVE) && rep.ok {
            rep.ok = false;
            rep.step = Some(k + 1);
        }
        prev = cur;
    }
    rep.final_norm = prev;
    Ok(rep)
}

/// Majorant: `|y|² − |x|²` inside the diamond `|x| + |y| < 1`, `1 − 2|x|` outside.
pub fn bellman_u(x: f64, y: &[f64]) -> f64 {
    let ny = norm(y);
    if x.abs() + ny < 1.0 {
        ny * ny - x * x
    } else {
        1.0 - 2.0 * x.abs()
    }
}

/// Minorant: `−2|x|` inside the diamond, `1 − 2|x|` outside.
pub fn bellman_v(x: f64, y: &[f64]) -> f64 {
    if x.abs() + norm(y) < 1.0 {
        -2.0 * x.abs()
    } else {
        1.0 - 2.0 * x.abs()
    }
}

/// `X̃ = X + A` with `X >= 0` a martingale and `A` nondecreasing and predictable.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmartingalePath {
    pub x: CadlagPath,
    pub a: CadlagPath,
    pub xtilde: CadlagPath,
}

impl SubmartingalePath {
    pub fn new(x: CadlagPath, a: CadlagPath) -> Result<Self> {
        if x.dim != 1 || a.dim != 1 || x.grid != a.grid {
            return Err(Error::Dimension("X and A must be scalar paths on one grid".into()));
        }
        if !a.jumps.is_empty() {
            return invalid("A is predictable and carries no jumps");
        }
        let mut xt = x.clone();
        for k in 0..x.len() {
            xt.values[k] += a.values[k];
        }
        for j in &mut xt.jumps {
            j.left[0] += a.values[j.index];
        }
        Ok(SubmartingalePath { x, a, xtilde: xt })
    }

    /// Hypothesis check: `X >= 0` (values and left limits) and `A` nondecreasing.
    pub fn hypotheses_hold(&self) -> bool {
        let x_ok = self.x.values.iter().all(|&v| v >= 0.0) && self.x.jumps.iter().all(|j| j.left[0] >= 0.0);
        let a_ok = self.a.values.windows(2).all(|w| w[1] >= w[0]) && self.a.values[0] >= 0.0;
        x_ok && a_ok
    }
}

/// Synthetic pair driving the weak-type and domination experiments.
///
/// `X` is a geometric Brownian martingale (volatility `sigma`) with optional
/// multiplicative jumps `1 ± jump_size` at Poisson times; `Y = ∫ H dX` with
/// predictable `|H| <= 1` in `R^y_dim`; `A_k = A_{k−1} + a X̃_{k−1} dt`; and `Z` solves
/// the ODE with `V = −I`. Then `E(X̃_T | F_k) = X̃_k (1 + a dt)^{T−k}` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticModel {
    pub grid: TimeGrid,
    pub a: f64,
    pub sigma: f64,
    pub x0: f64,
    pub y_dim: usize,
    pub jump_rate: f64,
    pub jump_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub sub: SubmartingalePath,
    pub z: ZPath,
}

impl SyntheticModel {
    pub fn drift(&self) -> DriftSpec {
        DriftSpec { a: self.a, dim: self.y_dim, v: VSource::ScaledIdentity(-1.0) }
    }

    fn direction<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let g: Vec<f64> = (0..self.y_dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&g).max(f64::MIN_POSITIVE);
        let m: f64 = rng.random::<f64>() * 2.0 - 1.0;
        g.iter().map(|v| v / n * m).collect()
    }

    pub fn sample(&self, rng: &mut PathRng) -> Result<SyntheticSample> {
        if !(self.jump_size < 1.0 && self.jump_size >= 0.0) || !(self.x0 > 0.0) {
            return invalid("synthetic model needs x0 > 0 and jump size in [0, 1)");
        }
        let n = self.grid.steps();
        let dt = self.grid.dt;
        let d = self.y_dim;
        let jump_p = 1.0 - (-self.jump_rate * dt).exp();
        let sd = self.sigma * dt.sqrt();
        let mut xs = Vec::with_capacity(n + 1);
        let mut ys = Vec::with_capacity((n + 1) * d);
        let mut a_vals = Vec::with_capacity(n + 1);
        let mut xj = Vec::new();
        let mut yj = Vec::new();
        let h0 = self.direction(rng);
        xs.push(self.x0);
        ys.extend(h0.iter().map(|h| h * self.x0));
        a_vals.push(0.0);
        for k in 1..=n {
            let xp = xs[k - 1];
            let a_prev = a_vals[k - 1];
            a_vals.push(a_prev + self.a * (xp + a_prev) * dt);
            let z: f64 = StandardNormal.sample(rng);
            let xl = xp * (sd * z - 0.5 * sd * sd).exp();
            let h = self.direction(rng);
            let yl: Vec<f64> = (0..d).map(|i| ys[(k - 1) * d + i] + h[i] * (xl - xp)).collect();
            if self.jump_rate > 0.0 && rng.random::<f64>() < jump_p {
                let up = rng.random::<bool>();
                let xk = xl * if up { 1.0 + self.jump_size } else { 1.0 - self.jump_size };
                let hj = self.direction(rng);
                xj.push(Jump { index: k, left: vec![xl] });
                yj.push(Jump { index: k, left: yl.clone() });
                ys.extend((0..d).map(|i| yl[i] + hj[i] * (xk - xl)));
                xs.push(xk);
            } else {
                xs.push(xl);
                ys.extend_from_slice(&yl);
            }
        }
        let x = CadlagPath { grid: self.grid, dim: 1, values: xs, jumps: xj };
        let y = CadlagPath { grid: self.grid, dim: d, values: ys, jumps: yj };
        let a = CadlagPath { grid: self.grid, dim: 1, values: a_vals, jumps: Vec::new() };
        let sub = SubmartingalePath::new(x, a)?;
        let z0 = y.value(0).to_vec();
        let z = evolve_z(&y, &self.drift(), &z0)?;
        Ok(SyntheticSample { sub, z })
    }

    /// `E(X̃_T | F)` along the skeleton of `X̃`.
    pub fn closure_expectation(&self, xt_skeleton: &Skeleton) -> Vec<f64> {
        let n = self.grid.steps();
        let g = 1.0 + self.a * self.grid.dt;
        (0..xt_skeleton.len())
            .map(|i| {
                let k = if i == 0 { 0 } else { xt_skeleton.grid_index[i - 1] };
                xt_skeleton.point(i)[0] * g.powi((n - k) as i32)
            })
            .collect()
    }
}

/// Per-path summary entering the weak-type curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakTypeSample {
    /// `sup_t (|Z_t| + X̃_t)` over grid values and left limits.
    pub maximal: f64,
    pub terminal: f64,
    pub admissible: bool,
}

/// Checks the hypotheses on one pair and summarizes it.
pub fn weak_type_sample(sub: &SubmartingalePath, z: &ZPath) -> Result<WeakTypeSample> {
    let sk = joint_skeleton(&[&sub.xtilde, &z.z]);
    let maximal = (0..sk[0].len()).map(|i| norm(sk[1].point(i)) + sk[0].point(i)[0].abs()).fold(0.0, f64::max);
    let sub_ok = check_differential_subordination(&sub.x, &z.y, None)?.ok;
    let foot_ok = norm(z.z.value(0)) <= sub.xtilde.value(0)[0] * (1.0 + 1e-12);
    Ok(WeakTypeSample { maximal, terminal: sub.xtilde.last()[0], admissible: sub_ok && foot_ok && sub.hypotheses_hold() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeRow {
    pub lambda: f64,
    pub empirical: f64,
    pub bound: f64,
    pub sigma: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakTypeCurve {
    pub rows: Vec<WeakTypeRow>,
    pub l1_norm: f64,
    pub used: usize,
    pub excluded: usize,
}

impl WeakTypeCurve {
    pub fn ok(&self) -> bool {
        self.excluded == 0 && self.rows.iter().all(|r| r.ok)
    }
}

/// Empirical `P(sup (|Z| + X̃) >= λ)` against `2 ‖X̃‖₁ / λ`; a row passes when the
/// empirical value is at most `bound (1 + 3σ)` with `σ` the binomial standard error.
pub fn weak_type_curve(samples: &[WeakTypeSample], lambdas: &[f64]) -> WeakTypeCurve {
    let used: Vec<&WeakTypeSample> = samples.iter().filter(|s| s.admissible).collect();
    let excluded = samples.len() - used.len();
    let nf = used.len().max(1) as f64;
    let l1_norm = used.iter().map(|s| s.terminal).sum::<f64>() / nf;
    let rows = lambdas
        .iter()
        .map(|&lambda| {
            let hits = used.iter().filter(|s| s.maximal >= lambda).count() as f64;
            let empirical = hits / nf;
            let sigma = (empirical * (1.0 - empirical) / nf).sqrt();
            let bound = 2.0 * l1_norm / lambda;
            WeakTypeRow { lambda, empirical, bound, sigma, ok: empirical <= bound * (1.0 + 3.0 * sigma) }
        })
        .collect();
    WeakTypeCurve { rows, l1_norm, used: used.len(), excluded }
}

pub fn weak_type_experiment(batch: &[(SubmartingalePath, ZPath)], lambdas: &[f64]) -> Result<WeakTypeCurve> {
    let samples = batch.iter().map(|(s, z)| weak_type_sample(s, z)).collect::<Result<Vec<_>>>()?;
    Ok(weak_type_curve(&samples, lambdas))
}

/// How a step of a `Z` sequence is split between levels when it crosses the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Drift then increment; a crossing is located inside the step by linear
    /// interpolation and the increment is divided at that fraction.
    Fractional,
    /// No drift; the old level keeps `ΔY − r X`, the new one starts at `r X`.
    Refoot,
    /// Drift, then the increment is treated as a jump (tree steps).
    DriftRefoot,
}

/// Discrete input of the `Z` construction.
pub struct ZSequence<'a> {
    pub dy: usize,
    /// Martingale part `X` (scalar) at every point.
    pub x: &'a [f64],
    pub xtilde: &'a [f64],
    pub y: &'a [f64],
    /// `E(X̃ | F)` at every point.
    pub theta: &'a [f64],
    pub z0: &'a [f64],
    /// Rule and drift step index of the step ending at point `i + 1`.
    pub rules: &'a [StepRule],
    pub drift_index: &'a [usize],
    pub drift: &'a DriftSpec,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZTrace {
    pub stops: Vec<Stop>,
    /// `Z̃ⁿ` at every point, one flat vector per level.
    pub levels: Vec<Vec<f64>>,
    /// `Σ Z̃ⁿ` at every point.
    pub total: Vec<f64>,
    pub zstar: f64,
}

/// Array-of-processes construction: level `n` is driven by `dY` on `[Tⁿ, Tⁿ⁺¹)` and
/// evolves homogeneously afterwards; `Tⁿ⁺¹` is the first time the active level or
/// `X̃` exceeds `threshold · E(X̃ | F_{Tⁿ})`.
pub fn construct_z(seq: &ZSequence, threshold: f64, level_budget: usize) -> Result<ZTrace> {
    let d = seq.dy;
    let len = seq.theta.len();
    let y = |i: usize| &seq.y[i * d..(i + 1) * d];
    let mut stops = vec![Stop { step: 0, fraction: 1.0, scale: seq.theta[0] }];
    let mut state: Vec<Vec<f64>> = vec![seq.z0.to_vec()];
    let mut history: Vec<Vec<f64>> = vec![seq.z0.to_vec()];
    let mut bound = threshold * seq.theta[0];
    let open_level = |stops: &mut Vec<Stop>, state: &mut Vec<Vec<f64>>, history: &mut Vec<Vec<f64>>, stop: Stop, points: usize| -> Result<()> {
        if stops.len() >= level_budget {
            return Err(Error::Budget { what: "sparse levels".into(), value: (stops.len() + 1) as f64, limit: level_budget as f64 });
        }
        stops.push(stop);
        state.push(vec![0.0; d]);
        history.push(vec![0.0; points * d]);
        Ok(())
    };
    for i in 1..len {
        let rule = seq.rules[i - 1];
        if rule != StepRule::Refoot {
            for s in state.iter_mut() {
                seq.drift.propagate(seq.drift_index[i - 1], seq.dt, s);
            }
        }
        let dy: Vec<f64> = (0..d).map(|k| y(i)[k] - y(i - 1)[k]).collect();
        let (xt0, xt1) = (seq.xtilde[i - 1], seq.xtilde[i]);
        match rule {
            StepRule::Fractional => {
                let mut s0 = 0.0f64;
                loop {
                    let act = state.last().unwrap().clone();
                    let end: Vec<f64> = (0..d).map(|k| act[k] + (1.0 - s0) * dy[k]).collect();
                    let cross_z = norm(&end) > bound;
                    let cross_x = xt1 > bound;
                    if !(cross_z || cross_x) {
                        let a = state.last_mut().unwrap();
                        a[..d].copy_from_slice(&end[..d]);
                        break;
                    }
                    let mut s_star = 1.0f64;
                    if cross_z {
                        // smallest u in (0, 1 - s0] with |act + u dy| = bound
                        let aa: f64 = dy.iter().map(|v| v * v).sum();
                        let bb: f64 = act.iter().zip(&dy).map(|(p, q)| p * q).sum();
                        let cc: f64 = act.iter().map(|v| v * v).sum::<f64>() - bound * bound;
                        let disc = (bb * bb - aa * cc).max(0.0);
                        let u = if aa > 0.0 { ((-bb + disc.sqrt()) / aa).max(0.0) } else { 0.0 };
                        s_star = s_star.min(s0 + u);
                    }
                    if cross_x && xt1 > xt0 {
                        s_star = s_star.min(((bound - xt0) / (xt1 - xt0)).max(s0));
                    } else if cross_x {
                        s_star = s0;
                    }
                    let s_star = s_star.clamp(s0, 1.0);
                    let a = state.last_mut().unwrap();
                    for k in 0..d {
                        a[k] += (s_star - s0) * dy[k];
                    }
                    let xt_s = xt0 + s_star * (xt1 - xt0);
                    let theta_s = (seq.theta[i - 1] + s_star * (seq.theta[i] - seq.theta[i - 1])).max(xt_s);
                    open_level(&mut stops, &mut state, &mut history, Stop { step: i, fraction: s_star.max(f64::MIN_POSITIVE), scale: theta_s }, len)?;
                    bound = threshold * theta_s;
                    s0 = s_star;
                    if s0 >= 1.0 {
                        break;
                    }
                }
            }
            StepRule::Refoot | StepRule::DriftRefoot => {
                let act = state.last().unwrap().clone();
                let end: Vec<f64> = (0..d).map(|k| act[k] + dy[k]).collect();
                if norm(&end) > bound || xt1 > bound {
                    let dx = seq.x[i] - seq.x[i - 1];
                    let foot: Vec<f64> = if dx == 0.0 {
                        vec![0.0; d]
                    } else {
                        let shrink = (dx.abs() / norm(&dy).max(f64::MIN_POSITIVE)).min(1.0);
                        dy.iter().map(|v| v / dx * seq.x[i] * shrink).collect()
                    };
                    let a = state.last_mut().unwrap();
                    for k in 0..d {
                        a[k] = end[k] - foot[k];
                    }
                    open_level(&mut stops, &mut state, &mut history, Stop { step: i, fraction: 1.0, scale: seq.theta[i] }, len)?;
                    *state.last_mut().unwrap() = foot;
                    bound = threshold * seq.theta[i];
                } else {
                    *state.last_mut().unwrap() = end;
                }
            }
        }
        for (h, s) in history.iter_mut().zip(&state) {
            if h.len() < len * d {
                h.resize(len * d, 0.0);
            }
            h[i * d..(i + 1) * d].copy_from_slice(s);
        }
    }
    for h in history.iter_mut() {
        h.resize(len * d, 0.0);
    }
    let mut total = vec![0.0; len * d];
    for h in &history {
        for (t, v) in total.iter_mut().zip(h) {
            *t += v;
        }
    }
    let zstar = (0..len).map(|i| norm(&total[i * d..(i + 1) * d])).fold(0.0, f64::max);
    Ok(ZTrace { stops, levels: history, total, zstar })
}

/// Result of the `Z` construction on one path or leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct ZFamilyPath {
    pub trace: ZTrace,
    /// `max |Z − Σ Z̃ⁿ| / (1 + |Z|)` over the points.
    pub telescoping_residual: f64,
    /// `max_n sup_t |Z̃ⁿ_t| / E(X̃ | F_{Tⁿ})`.
    pub worst_level_ratio: f64,
    /// Largest increase of `|Z̃ⁿ|` after its driver window closed (relative).
    pub decay_violation: f64,
}

fn finish_path(trace: ZTrace, z_points: &[f64], d: usize) -> ZFamilyPath {
    let len = trace.total.len() / d;
    let mut resid = 0.0f64;
    for i in 0..len {
        let zi = &z_points[i * d..(i + 1) * d];
        let diff: Vec<f64> = zi.iter().zip(&trace.total[i * d..(i + 1) * d]).map(|(a, b)| a - b).collect();
        resid = resid.max(norm(&diff) / (1.0 + norm(zi)));
    }
    let mut worst = 0.0f64;
    let mut decay = 0.0f64;
    for (n, h) in trace.levels.iter().enumerate() {
        let sup = (0..len).map(|i| norm(&h[i * d..(i + 1) * d])).fold(0.0, f64::max);
        let sc = trace.stops[n].scale;
        if sc > 0.0 {
            worst = worst.max(sup / sc);
        } else if sup > 0.0 {
            worst = f64::INFINITY;
        }
        if let Some(next) = trace.stops.get(n + 1) {
            let start = next.step;
            for i in start + 1..len {
                let (a, b) = (norm(&h[(i - 1) * d..i * d]), norm(&h[i * d..(i + 1) * d]));
                decay = decay.max((b - a) / (1.0 + a));
            }
        }
    }
    ZFamilyPath { trace, telescoping_residual: resid, worst_level_ratio: worst, decay_violation: decay }
}

/// `Z`-family on one path with `E(X̃ | F)` given along the joint skeleton of (X̃, Z).
pub fn build_sparse_family_z_path(sub: &SubmartingalePath, z: &ZPath, theta: &dyn Fn(&Skeleton) -> Vec<f64>, threshold: f64) -> Result<ZFamilyPath> {
    let sk = joint_skeleton(&[&sub.x, &sub.xtilde, &z.y, &z.z]);
    let th = theta(&sk[1]);
    let rules: Vec<StepRule> = sk[0].kinds.iter().map(|k| if *k == StepKind::Jump { StepRule::Refoot } else { StepRule::Fractional }).collect();
    let drift_index: Vec<usize> = sk[0].grid_index.iter().map(|k| k - 1).collect();
    let seq = ZSequence {
        dy: z.y.dim,
        x: &sk[0].points,
        xtilde: &sk[1].points,
        y: &sk[2].points,
        theta: &th,
        z0: z.z.value(0),
        rules: &rules,
        drift_index: &drift_index,
        drift: &z.drift,
        dt: z.z.grid.dt,
    };
    let trace = construct_z(&seq, threshold, crate::sparse::DEFAULT_LEVEL_BUDGET)?;
    Ok(finish_path(trace, &sk[3].points, z.y.dim))
}

/// A tree analogue: `X̃` is an arbitrary nonnegative adapted process, `X` its
/// martingale part, `Z` evolved level by level with time step `dt`.
pub struct TreeZInput<'a> {
    pub space: &'a TreeSpace,
    pub x: &'a TreeProcess,
    pub xtilde: &'a TreeProcess,
    pub y: &'a TreeProcess,
    pub drift: &'a DriftSpec,
    pub dt: f64,
}

/// `Z` on the tree: `Z_root = Y_root`, `Z_child = Φ Z_parent + ΔY`.
pub fn evolve_z_tree(input: &TreeZInput) -> Result<TreeProcess> {
    input.drift.check_stability(input.dt)?;
    let d = input.y.dim;
    let sp = input.space;
    let mut values = vec![0.0; sp.n_nodes() * d];
    values[..d].copy_from_slice(input.y.value(0));
    for v in 1..sp.n_nodes() {
        let p = sp.parent(v);
        let mut z = values[p * d..(p + 1) * d].to_vec();
        input.drift.propagate(sp.level(p), input.dt, &mut z);
        for k in 0..d {
            z[k] += input.y.value(v)[k] - input.y.value(p)[k];
        }
        values[v * d..(v + 1) * d].copy_from_slice(&z);
    }
    TreeProcess::new(sp, d, values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeZFamily {
    pub family: StoppingFamily,
    pub paths: Vec<ZFamilyPath>,
}

pub fn build_sparse_family_z_tree(input: &TreeZInput, threshold: f64) -> Result<TreeZFamily> {
    let sp = input.space;
    let z = evolve_z_tree(input)?;
    let leaves_xt: Vec<f64> = (0..sp.n_leaves()).map(|l| input.xtilde.value(sp.leaf_node(l))[0]).collect();
    let theta = TreeProcess::martingale_from_leaves(sp, &leaves_xt, 1)?;
    let d = input.y.dim;
    let mut paths = Vec::with_capacity(sp.n_leaves());
    for leaf in 0..sp.n_leaves() {
        let nodes = sp.path(leaf);
        let pick = |p: &TreeProcess| -> Vec<f64> { nodes.iter().flat_map(|&v| p.value(v).to_vec()).collect() };
        let (xs, xts, ys, zs) = (pick(input.x), pick(input.xtilde), pick(input.y), pick(&z));
        let th: Vec<f64> = nodes.iter().map(|&v| theta.values[v]).collect();
        let rules = vec![StepRule::DriftRefoot; nodes.len() - 1];
        let drift_index: Vec<usize> = (0..nodes.len() - 1).collect();
        let seq = ZSequence {
            dy: d,
            x: &xs,
            xtilde: &xts,
            y: &ys,
            theta: &th,
            z0: input.y.value(0),
            rules: &rules,
            drift_index: &drift_index,
            drift: input.drift,
            dt: input.dt,
        };
        let trace = construct_z(&seq, threshold, crate::sparse::DEFAULT_LEVEL_BUDGET)?;
        paths.push(finish_path(trace, &zs, d));
    }
    let stops = paths.iter().map(|p| p.trace.stops.clone()).collect();
    Ok(TreeZFamily { family: StoppingFamily { provenance: Provenance::ZConstruction, stops }, paths })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::constant_path;

    #[test]
    fn bellman_values() {
        assert_eq!(bellman_u(0.0, &[0.0]), 0.0);
        assert_eq!(bellman_v(0.0, &[0.0]), 0.0);
        assert!((bellman_u(0.3, &[0.2]) + 0.05).abs() < 1e-15);
        assert_eq!(bellman_u(1.0, &[0.0]), -1.0);
        assert_eq!(bellman_v(0.5, &[0.5]), 0.0);
    }

    #[test]
    fn zero_driver_stays_zero() {
        let g = TimeGrid::new(1.0, 1e-2).unwrap();
        let y = constant_path(g, &[0.0, 0.0]);
        let z = evolve_z(&y, &DriftSpec::gauss(2, 0.3).unwrap(), &[0.0, 0.0]).unwrap();
        assert!(z.z.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn exponential_decay() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let y = constant_path(g, &[0.0]);
        let z = evolve_z(&y, &DriftSpec::new(1.0, 1, VSource::ScaledIdentity(0.0)).unwrap(), &[1.0]).unwrap();
        let exact = (-1.0f64).exp();
        assert!(((z.z.last()[0] - exact) / exact).abs() <= 2e-3);
    }

    #[test]
    fn pure_transport() {
        let g = TimeGrid::new(1.0, 0.1).unwrap();
        let y = crate::paths::simulate_brownian(g, 1, 1.0, 5).unwrap();
        let z = evolve_z(&y, &DriftSpec::zero(1), &[0.25]).unwrap();
        for k in 0..y.len() {
            assert!((z.z.value(k)[0] - (0.25 + y.value(k)[0] - y.value(0)[0])).abs() < 1e-14);
        }
    }

    #[test]
    fn stability_rejected() {
        let g = TimeGrid::new(1.0, 0.5).unwrap();
        let y = constant_path(g, &[0.0]);
        match evolve_z(&y, &DriftSpec::gauss(1, 1.5).unwrap(), &[1.0]) {
            Err(Error::Unstable { required_dt, .. }) => assert!((required_dt - 0.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_indefinite_v() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(DriftSpec::new(0.0, 2, VSource::Constant(m)).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -1.0]);
        assert!(DriftSpec::new(0.0, 2, VSource::Constant(m)).is_err());
    }

    #[test]
    fn norm_decay_examples() {
        let g = TimeGrid::new(1.0, 1e-3).unwrap();
        let r = norm_decay_check(&DriftSpec::gauss(2, 0.0).unwrap(), &[1.0, 0.0], g).unwrap();
        assert!(r.ok);
        assert!((r.final_norm - (1.0f64 - 1e-3).powi(1000)).abs() < 1e-12);
        let r = norm_decay_check(&DriftSpec::zero(2), &[1.0, 0.0], g).unwrap();
        assert!(r.ok && r.final_norm == 1.0);
    }

    #[test]
    fn deterministic_weak_type() {
        let samples: Vec<WeakTypeSample> = (0..10).map(|_| WeakTypeSample { maximal: 1.5, terminal: 1.5, admissible: true }).collect();
        let c = weak_type_curve(&samples, &[1.0, 1.5, 2.0]);
        assert_eq!(c.rows.iter().map(|r| r.empirical).collect::<Vec<_>>(), vec![1.0, 1.0, 0.0]);
        assert!(c.ok());
        assert!(c.rows[1].bound >= 2.0);
    }
}
