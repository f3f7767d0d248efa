use super::background::{finish_step, initial_point, vertical_draw, Layering, VerticalMove};
use super::field::{hermite, PoissonField, TestFunction};
use super::geometry::Geometry;
use super::oracle::fft_riesz_oracle;
use crate::error::{invalid, Error, Result};
use crate::rng::{child_seed, substream, PathRng};
use crate::sparse::normal_cdf;
use crate::zprocess::DriftSpec;
use rayon::prelude::*;
use std::f64::consts::TAU;

/// Bins below this count are flagged low-confidence.
pub const MIN_BIN_COUNT: u64 = 100;
/// Runs with a larger censored fraction are unusable.
pub const MAX_CENSORED_FRACTION: f64 = 0.01;
const PRE_SEGMENT: u64 = 0x5052_4553_4547;

/// Partition of the first coordinate into cells of equal `μ_φ` mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Bins {
    pub edges: Vec<f64>,
}

impl Bins {
    pub fn for_geometry(geom: &Geometry, count: usize) -> Result<Self> {
        if count == 0 {
            return invalid("bin count must be positive");
        }
        let edges = match geom {
            Geometry::Torus { .. } => (0..=count).map(|i| TAU * i as f64 / count as f64).collect(),
            Geometry::Gauss { .. } => (0..=count).map(|i| normal_quantile(i as f64 / count as f64)).collect(),
            Geometry::Bessel { .. } => return Err(Error::Unsupported("no finite invariant measure to bin on the Bessel geometry".into())),
        };
        Ok(Bins { edges })
    }

    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn index(&self, x: f64) -> usize {
        let i = self.edges.partition_point(|e| *e <= x);
        i.clamp(1, self.count()) - 1
    }

    pub fn center(&self, b: usize) -> f64 {
        let (lo, hi) = (self.edges[b], self.edges[b + 1]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 1.0,
            (true, false) => lo + 1.0,
            _ => 0.0,
        }
    }

    /// Every bin carries mass `1/count`.
    pub fn mass(&self) -> f64 {
        1.0 / self.count() as f64
    }
}

/// Inverse standard normal CDF by bisection (setup only).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub y0: f64,
    pub dt: f64,
    pub t_max: f64,
    pub paths: usize,
    pub bins: usize,
    pub seed: u64,
    /// Layered stepping (see [`Layering::standard`]) instead of one uniform step.
    pub layered: bool,
    pub bridge: bool,
    pub chunk: usize,
    /// Vertical decay rate that sets the layer heights; defaults to the slowest mode.
    pub decay_rate: Option<f64>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { y0: 8.0, dt: 1e-3, t_max: 1e12, paths: 1_000_000, bins: 64, seed: 1, layered: true, bridge: true, chunk: 4096, decay_rate: None }
    }
}

/// Binned conditional expectation of `−2 Z_τ` given the first coordinate of `B^M_τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RieszEstimate {
    pub geometry: Geometry,
    pub bins: Bins,
    pub dim: usize,
    pub counts: Vec<u64>,
    /// `bins × dim`, row-major.
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub paths: usize,
    pub censored: usize,
    pub mean_steps: f64,
    pub layering: Layering,
}

impl RieszEstimate {
    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.bins.count()).map(|b| self.mean[b * self.dim + i]).collect()
    }

    pub fn se_component(&self, i: usize) -> Vec<f64> {
        (0..self.bins.count()).map(|b| self.se[b * self.dim + i]).collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.paths.max(1) as f64
    }

    pub fn usable(&self) -> bool {
        self.censored_fraction() <= MAX_CENSORED_FRACTION
    }

    pub fn low_confidence(&self) -> Vec<bool> {
        self.counts.iter().map(|&c| c < MIN_BIN_COUNT).collect()
    }

    pub fn low_confidence_fraction(&self) -> f64 {
        self.low_confidence().iter().filter(|&&l| l).count() as f64 / self.bins.count() as f64
    }

    /// Pearson χ² of the bin counts against equal masses, and its z-score
    /// `(χ² − k + 1)/sqrt(2(k − 1))`.
    pub fn invariant_measure_chi2(&self) -> (f64, f64) {
        let total: u64 = self.counts.iter().sum();
        let e = total as f64 / self.bins.count() as f64;
        let chi2: f64 = self.counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        let k = self.bins.count() as f64;
        (chi2, (chi2 - (k - 1.0)) / (2.0 * (k - 1.0)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Acc {
    counts: Vec<u64>,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
    censored: usize,
    steps: u64,
}

impl Acc {
    fn new(bins: usize, dim: usize) -> Self {
        Acc { counts: vec![0; bins], sum: vec![0.0; bins * dim], sumsq: vec![0.0; bins * dim], censored: 0, steps: 0 }
    }

    fn deposit(&mut self, b: usize, z: &[f64]) {
        let d = z.len();
        self.counts[b] += 1;
        for i in 0..d {
            let v = -2.0 * z[i];
            self.sum[b * d + i] += v;
            self.sumsq[b * d + i] += v * v;
        }
    }

    fn merge(&mut self, o: &Acc) {
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&o.sum) {
            *a += b;
        }
        for (a, b) in self.sumsq.iter_mut().zip(&o.sumsq) {
            *a += b;
        }
        self.censored += o.censored;
        self.steps += o.steps;
    }

    fn finish(self, geom: Geometry, bins: Bins, dim: usize, paths: usize, layering: Layering) -> RieszEstimate {
        let nb = bins.count();
        let mut mean = vec![0.0; nb * dim];
        let mut se = vec![f64::INFINITY; nb * dim];
        for b in 0..nb {
            let n = self.counts[b] as f64;
            for i in 0..dim {
                if n > 0.0 {
                    let m = self.sum[b * dim + i] / n;
                    mean[b * dim + i] = m;
                    if n > 1.0 {
                        let var = ((self.sumsq[b * dim + i] - n * m * m) / (n - 1.0)).max(0.0);
                        se[b * dim + i] = (var / n).sqrt();
                    }
                }
            }
        }
        RieszEstimate { geometry: geom, bins, dim, counts: self.counts, mean, se, paths, censored: self.censored, mean_steps: self.steps as f64 / paths.max(1) as f64, layering }
    }
}

struct Context<'a> {
    field: &'a PoissonField,
    geom: Geometry,
    drift: DriftSpec,
    curvature: f64,
    layering: Layering,
}

struct Segment {
    x: Vec<f64>,
    z: Vec<f64>,
    /// Product of the scalar propagators applied along the segment.
    propagator: f64,
    time: f64,
    steps: u64,
}

impl Context<'_> {
    /// From height `y0` down to 0, streaming `B^M`, `Y` and `Z`.
    fn main_segment(&self, mut x: Vec<f64>, y0: f64, rng: &mut PathRng) -> Segment {
        let n = x.len();
        let mut z = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let (mut b, mut t, mut prop, mut steps) = (y0, 0.0f64, 1.0f64, 0u64);
        loop {
            let mv = vertical_draw(&self.layering, b, 0.0, rng);
            steps += 1;
            match mv {
                VerticalMove::Skip { dt, to, hit, .. } => {
                    self.geom.step(&mut x, dt, rng);
                    let f = (self.curvature * dt).exp();
                    z.iter_mut().for_each(|v| *v *= f);
                    prop *= f;
                    t += dt;
                    b = to;
                    if hit {
                        break;
                    }
                }
                VerticalMove::Step { dt, from, .. } => {
                    self.field.grad_x_into(&x, from, &mut grad);
                    self.geom.step(&mut x, dt, rng);
                    let mv = finish_step(&self.layering, mv, 0.0, rng);
                    self.drift.propagate(0, dt, &mut z);
                    prop *= 1.0 + self.curvature * dt;
                    let db = mv.end() - from;
                    for i in 0..n {
                        z[i] += grad[i] * db;
                    }
                    t += dt;
                    b = mv.end();
                    if mv.hit() {
                        break;
                    }
                }
            }
            if t > self.layering.t_max {
                break;
            }
        }
        Segment { x, z, propagator: prop, time: t, steps }
    }

    /// From `y_hi` down to `y_lo`, ending with `B^M = x_end`; `B^M` is generated
    /// backward from its end point, which is valid because its law started from
    /// `μ_φ` is reversible.
    fn pre_segment(&self, x_end: &[f64], y_hi: f64, y_lo: f64, rng: &mut PathRng) -> Segment {
        let mut moves = Vec::new();
        let mut b = y_hi;
        let mut t = 0.0f64;
        loop {
            let mv = vertical_draw(&self.layering, b, y_lo, rng);
            let mv = finish_step(&self.layering, mv, y_lo, rng);
            t += mv.dt();
            b = mv.end();
            moves.push(mv);
            if mv.hit() || t > self.layering.t_max {
                break;
            }
        }
        let n = x_end.len();
        let mut x = x_end.to_vec();
        let mut z = vec![0.0; n];
        let mut grad = vec![0.0; n];
        let mut w = 1.0f64;
        for mv in moves.iter().rev() {
            self.geom.step(&mut x, mv.dt(), rng);
            match *mv {
                VerticalMove::Step { dt, from, to, .. } => {
                    self.field.grad_x_into(&x, from, &mut grad);
                    for i in 0..n {
                        z[i] += w * grad[i] * (to - from);
                    }
                    w *= 1.0 + self.curvature * dt;
                }
                VerticalMove::Skip { dt, .. } => w *= (self.curvature * dt).exp(),
            }
        }
        Segment { x, z, propagator: w, time: t, steps: moves.len() as u64 }
    }
}

fn context<'a>(field: &'a PoissonField, cfg: &EstimatorConfig) -> Result<Context<'a>> {
    let geom = field.geometry();
    let curvature = geom.scalar_curvature().ok_or_else(|| Error::Unsupported("the Riesz estimator covers the torus and Gauss geometries".into()))?;
    let drift = geom.drift_spec()?;
    let layering = if cfg.layered {
        Layering::standard(cfg.dt, cfg.t_max, cfg.decay_rate.or(field.min_rate()).unwrap_or(1.0))
    } else {
        Layering::uniform(cfg.dt, cfg.t_max)
    };
    let layering = Layering { bridge: cfg.bridge, ..layering };
    layering.validate()?;
    drift.check_stability(layering.coarse_dt)?;
    Ok(Context { field, geom, drift, curvature, layering })
}

fn check(cfg: &EstimatorConfig, f: &TestFunction) -> Result<()> {
    if !(cfg.y0 > 0.0 && cfg.y0.is_finite()) {
        return invalid(format!("starting height must be positive, got {}", cfg.y0));
    }
    if cfg.paths == 0 || cfg.chunk == 0 {
        return invalid("paths and chunk must be positive");
    }
    if !f.is_mean_zero() {
        return invalid("the test function must have mean zero under the invariant measure");
    }
    Ok(())
}

fn run(field: &PoissonField, cfg: &EstimatorConfig, doubled: bool) -> Result<(RieszEstimate, Option<RieszEstimate>)> {
    check(cfg, field.function())?;
    let ctx = context(field, cfg)?;
    let geom = ctx.geom;
    let bins = Bins::for_geometry(&geom, cfg.bins)?;
    let dim = geom.dim();
    let chunks = cfg.paths.div_ceil(cfg.chunk);
    let pre_seed = child_seed(cfg.seed, PRE_SEGMENT);
    let parts: Vec<(Acc, Acc)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut base = Acc::new(bins.count(), dim);
            let mut high = Acc::new(bins.count(), dim);
            for path in c * cfg.chunk..((c + 1) * cfg.chunk).min(cfg.paths) {
                let mut rng = substream(cfg.seed, path as u64);
                let x0 = initial_point(&geom, &mut rng);
                let main = ctx.main_segment(x0.clone(), cfg.y0, &mut rng);
                base.steps += main.steps;
                let bin = bins.index(main.x[0]);
                if main.time > ctx.layering.t_max {
                    base.censored += 1;
                } else {
                    base.deposit(bin, &main.z);
                }
                if doubled {
                    let mut rng2 = substream(pre_seed, path as u64);
                    let pre = ctx.pre_segment(&x0, 2.0 * cfg.y0, cfg.y0, &mut rng2);
                    high.steps += main.steps + pre.steps;
                    let z: Vec<f64> = main.z.iter().zip(&pre.z).map(|(m, p)| m + main.propagator * p).collect();
                    if main.time + pre.time > ctx.layering.t_max {
                        high.censored += 1;
                    } else {
                        high.deposit(bin, &z);
                    }
                }
            }
            (base, high)
        })
        .collect();
    let mut base = Acc::new(bins.count(), dim);
    let mut high = Acc::new(bins.count(), dim);
    for (b, h) in &parts {
        base.merge(b);
        high.merge(h);
    }
    let est = base.finish(geom, bins.clone(), dim, cfg.paths, ctx.layering);
    let hi = doubled.then(|| high.finish(geom, bins, dim, cfg.paths, ctx.layering));
    Ok((est, hi))
}

/// Estimates `R f` on the bins of `B^M_τ` (the sign and factor of `−2 Z_τ` included).
pub fn gv_li_estimator(geom: Geometry, f: &TestFunction, cfg: &EstimatorConfig) -> Result<RieszEstimate> {
    let field = PoissonField::new(geom, f.clone(), 0.0)?;
    Ok(run(&field, cfg, false)?.0)
}

/// One coupled run at heights `y0` and `2 y0`: the `2 y0` path first descends to `y0`
/// and then follows the `y0` path. The `y0` estimate equals the standalone one.
pub fn gv_li_doubling(geom: Geometry, f: &TestFunction, cfg: &EstimatorConfig) -> Result<(RieszEstimate, RieszEstimate)> {
    let field = PoissonField::new(geom, f.clone(), 0.0)?;
    let (a, b) = run(&field, cfg, true)?;
    Ok((a, b.expect("doubled run")))
}

/// `Z_τ` for one stored background (uniform grid), through [`crate::zprocess::evolve_z`].
pub fn z_at_tau(field: &PoissonField, state: &super::background::BackgroundState) -> Result<Vec<f64>> {
    let geom = field.geometry();
    let drift = geom.drift_spec()?;
    let tau = state.tau_index.ok_or_else(|| Error::Invalid("censored background has no exit time".into()))?;
    let d = state.dim;
    let grid = crate::paths::TimeGrid::new(tau as f64 * state.grid.dt, state.grid.dt)?;
    let mut y = vec![0.0; (tau + 1) * d];
    let mut g = vec![0.0; d];
    for k in 0..tau {
        field.grad_x_into(state.bm_at(k), state.b[k], &mut g);
        for i in 0..d {
            y[(k + 1) * d + i] = y[k * d + i] + g[i] * (state.b[k + 1] - state.b[k]);
        }
    }
    let path = crate::paths::CadlagPath { grid, dim: d, values: y, jumps: Vec::new() };
    let z = crate::zprocess::evolve_z(&path, &drift, &vec![0.0; d])?;
    Ok(z.z.last().to_vec())
}

/// `sqrt(Σ w |e − t|²) / sqrt(Σ w t²)`.
pub fn relative_l2_error(estimate: &[f64], target: &[f64], weights: &[f64]) -> f64 {
    let num: f64 = estimate.iter().zip(target).zip(weights).map(|((e, t), w)| w * (e - t).powi(2)).sum();
    let den: f64 = target.iter().zip(weights).map(|(t, w)| w * t * t).sum();
    (num / den).sqrt()
}

/// Bin averages of the first component of `R f`, from an independent oracle: the
/// FFT multiplier on the torus, exact Gaussian integrals of Hermite modes.
pub fn bin_targets(geom: &Geometry, f: &TestFunction, bins: &Bins) -> Result<Vec<f64>> {
    let first_only = match f {
        TestFunction::Fourier(t) => t.iter().all(|t| t.freq[1..].iter().all(|&k| k == 0)),
        TestFunction::Hermite(t) => t.iter().all(|t| t.degrees[1..].iter().all(|&k| k == 0)),
    };
    if !first_only {
        return Err(Error::Unsupported("bin targets need a test function of the first coordinate only".into()));
    }
    match (geom, f) {
        (Geometry::Torus { .. }, TestFunction::Fourier(_)) => {
            let m = 1024usize;
            let n = geom.dim();
            let samples: Vec<f64> = (0..m)
                .map(|j| {
                    let mut x = vec![0.0; n];
                    x[0] = TAU * (j as f64 + 0.5) / m as f64;
                    f.value(&x)
                })
                .collect();
            let out = fft_riesz_oracle(&samples, &[m])?;
            let mut sum = vec![0.0; bins.count()];
            let mut cnt = vec![0usize; bins.count()];
            for j in 0..m {
                let b = bins.index(TAU * (j as f64 + 0.5) / m as f64);
                sum[b] += out.components[0][j];
                cnt[b] += 1;
            }
            if cnt.contains(&0) {
                return invalid("too many bins for the oracle grid");
            }
            Ok(sum.iter().zip(&cnt).map(|(s, c)| s / *c as f64).collect())
        }
        (Geometry::Gauss { .. }, TestFunction::Hermite(terms)) => {
            let pdf = |x: f64| if x.is_finite() { (-0.5 * x * x).exp() / (TAU).sqrt() } else { 0.0 };
            // ∫_a^b He_m dγ = He_{m−1}(a)φ(a) − He_{m−1}(b)φ(b) for m >= 1
            let integral = |m: u32, a: f64, b: f64| -> f64 {
                if m == 0 {
                    normal_cdf(b) - normal_cdf(a)
                } else {
                    let h = |x: f64| if x.is_finite() { hermite(m - 1, x) * pdf(x) } else { 0.0 };
                    h(a) - h(b)
                }
            };
            Ok((0..bins.count())
                .map(|b| {
                    let (lo, hi) = (bins.edges[b], bins.edges[b + 1]);
                    let mass = normal_cdf(hi) - normal_cdf(lo);
                    terms
                        .iter()
                        .filter(|t| t.degrees[0] > 0)
                        .map(|t| {
                            let k = t.degrees[0];
                            t.coef * (k as f64).sqrt() * integral(k - 1, lo, hi) / mass
                        })
                        .sum()
                })
                .collect())
        }
        _ => Err(Error::Unsupported("no oracle for this pairing".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightReport {
    /// `max_b |Δ_b| / sqrt(se₁² + se₂²)` over bins, first component.
    pub worst_ratio: f64,
    pub worst_bin: usize,
    pub max_shift: f64,
    pub ok: bool,
}

pub fn height_shift(base: &RieszEstimate, doubled: &RieszEstimate) -> HeightReport {
    let (m1, m2) = (base.component(0), doubled.component(0));
    let (s1, s2) = (base.se_component(0), doubled.se_component(0));
    let mut rep = HeightReport { worst_ratio: 0.0, worst_bin: 0, max_shift: 0.0, ok: true };
    for b in 0..m1.len() {
        let shift = (m1[b] - m2[b]).abs();
        let pooled = (s1[b] * s1[b] + s2[b] * s2[b]).sqrt();
        let r = shift / pooled;
        rep.max_shift = rep.max_shift.max(shift);
        if r > rep.worst_ratio || r.is_nan() {
            rep.worst_ratio = r;
            rep.worst_bin = b;
        }
        if !(shift < pooled) {
            rep.ok = false;
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::super::background::simulate_background_with;
    use super::*;
    use crate::paths::TimeGrid;

    fn small(paths: usize) -> EstimatorConfig {
        EstimatorConfig { paths, bins: 8, chunk: 64, y0: 2.0, dt: 1e-2, ..Default::default() }
    }

    #[test]
    fn quantile_inverts_cdf() {
        for p in [1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((normal_cdf(normal_quantile(p)) - p).abs() < 1e-14);
        }
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn bin_lookup() {
        let b = Bins::for_geometry(&Geometry::Torus { n: 1 }, 4).unwrap();
        assert_eq!(b.index(0.0), 0);
        assert_eq!(b.index(TAU - 1e-12), 3);
        assert_eq!(b.index(TAU / 4.0 + 1e-12), 1);
        let g = Bins::for_geometry(&Geometry::Gauss { n: 1 }, 64).unwrap();
        assert_eq!(g.index(-50.0), 0);
        assert_eq!(g.index(0.0), 32);
        assert!(Bins::for_geometry(&Geometry::Bessel { alpha: 1.0 }, 4).is_err());
    }

    #[test]
    fn linear_in_the_test_function() {
        let g = Geometry::Torus { n: 1 };
        let c = EstimatorConfig { decay_rate: Some(1.0), ..small(300) };
        let (f1, f2) = (TestFunction::cos(1, 1), TestFunction::sin(1, 2));
        let both = TestFunction::parse("cos + sin2", 1).unwrap();
        let (a, b, s) = (gv_li_estimator(g, &f1, &c).unwrap(), gv_li_estimator(g, &f2, &c).unwrap(), gv_li_estimator(g, &both, &c).unwrap());
        assert_eq!(a.counts, s.counts);
        for i in 0..s.mean.len() {
            assert!((a.mean[i] + b.mean[i] - s.mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_function_gives_zero() {
        let e = gv_li_estimator(Geometry::Torus { n: 2 }, &TestFunction::zero_fourier(), &small(100)).unwrap();
        assert!(e.mean.iter().all(|m| *m == 0.0));
        assert_eq!(e.counts.iter().sum::<u64>(), 100);
    }

    #[test]
    fn rejects_unsupported_inputs() {
        let c = small(10);
        assert!(gv_li_estimator(Geometry::Bessel { alpha: 1.0 }, &TestFunction::cos(1, 1), &c).is_err());
        let with_mean = TestFunction::parse("hE0", 1);
        assert!(with_mean.is_err() || gv_li_estimator(Geometry::Gauss { n: 1 }, &with_mean.unwrap(), &c).is_err());
        assert!(gv_li_estimator(Geometry::Torus { n: 1 }, &TestFunction::cos(1, 1), &EstimatorConfig { y0: -1.0, ..c }).is_err());
    }

    #[test]
    fn doubled_run_keeps_the_base_estimate() {
        let g = Geometry::Gauss { n: 1 };
        let f = TestFunction::hermite(1, 2);
        let c = small(200);
        let alone = gv_li_estimator(g, &f, &c).unwrap();
        let (base, high) = gv_li_doubling(g, &f, &c).unwrap();
        assert_eq!(alone, base);
        assert_eq!(high.counts, base.counts);
        assert!(high.mean_steps > base.mean_steps);
    }

    #[test]
    fn streaming_matches_stored_background() {
        let g = Geometry::Gauss { n: 2 };
        let f = TestFunction::hermite(2, 1);
        let field = PoissonField::new(g, f.clone(), 0.0).unwrap();
        let cfg = EstimatorConfig { layered: false, dt: 1e-2, t_max: 400.0, ..small(1) };
        let ctx = context(&field, &cfg).unwrap();
        for path in 0..20u64 {
            let mut rng = substream(7, path);
            let x0 = initial_point(&g, &mut rng);
            let seg = ctx.main_segment(x0, 1.5, &mut rng);
            let mut rng = substream(7, path);
            let state = simulate_background_with(&g, 1.5, TimeGrid::new(400.0, 1e-2).unwrap(), &mut rng, true).unwrap();
            if state.censored {
                continue;
            }
            assert_eq!(seg.x.as_slice(), state.bm_at(state.tau_index.unwrap()));
            let z = z_at_tau(&field, &state).unwrap();
            for (a, b) in seg.z.iter().zip(&z) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn targets_match_closed_forms() {
        let bins = Bins::for_geometry(&Geometry::Torus { n: 1 }, 16).unwrap();
        let t = bin_targets(&Geometry::Torus { n: 1 }, &TestFunction::cos(1, 1), &bins).unwrap();
        for b in 0..16 {
            let (lo, hi) = (bins.edges[b], bins.edges[b + 1]);
            let exact = (hi.cos() - lo.cos()) / (hi - lo);
            assert!((t[b] - exact).abs() < 1e-5);
        }
        let g = Geometry::Gauss { n: 1 };
        let bins = Bins::for_geometry(&g, 64).unwrap();
        let t = bin_targets(&g, &TestFunction::hermite(1, 2), &bins).unwrap();
        // √2 He_1 has mean zero and second moment 2
        let mean: f64 = t.iter().sum::<f64>() * bins.mass();
        assert!(mean.abs() < 1e-12);
        let second: f64 = t.iter().map(|v| v * v).sum::<f64>() * bins.mass();
        assert!(second < 2.0 && second > 1.9);
    }

    #[test]
    fn relative_error_of_exact_match_is_zero() {
        let w = [0.25; 4];
        assert_eq!(relative_l2_error(&[1.0, -1.0, 2.0, 0.0], &[1.0, -1.0, 2.0, 0.0], &w), 0.0);
        assert!((relative_l2_error(&[2.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0, 0.0], &w) - 1.0).abs() < 1e-15);
    }
}
