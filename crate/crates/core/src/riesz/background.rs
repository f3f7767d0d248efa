use super::geometry::Geometry;
use crate::error::{invalid, Result};
use crate::paths::TimeGrid;
use crate::rng::{substream, PathRng};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `(B^M, B)` on a uniform grid up to the first hit of 0 by the vertical part.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundState {
    pub grid: TimeGrid,
    pub dim: usize,
    /// `B^M` at grid points `0..=last`, `dim` entries each.
    pub bm: Vec<f64>,
    /// Vertical motion at grid points `0..=last`; `b[tau_index] = 0`.
    pub b: Vec<f64>,
    pub tau_index: Option<usize>,
    pub censored: bool,
}

impl BackgroundState {
    pub fn points(&self) -> usize {
        self.b.len()
    }

    pub fn bm_at(&self, k: usize) -> &[f64] {
        &self.bm[k * self.dim..(k + 1) * self.dim]
    }
}

/// Probability that a variance-rate-2 Brownian bridge from `a > h` to `b > h` over
/// time `dt` touches `h`.
pub fn bridge_crossing_probability(a: f64, b: f64, h: f64, dt: f64) -> f64 {
    if a <= h || b <= h {
        return 1.0;
    }
    (-(a - h) * (b - h) / dt).exp()
}

/// Start of `B^M`: a draw from `μ_φ`, or `x = 1` for the Bessel geometry.
pub fn initial_point(geom: &Geometry, rng: &mut PathRng) -> Vec<f64> {
    let mut x = vec![1.0; geom.dim()];
    if geom.has_invariant_probability() {
        geom.sample_invariant(rng, &mut x).expect("probability geometry");
    }
    x
}

/// Uniform-grid simulation with variance rate 2 for `B`; absorbed at the first step
/// ending at or below 0 or, with `bridge`, when the interpolating bridge touches 0.
pub fn simulate_background(geom: &Geometry, y0: f64, grid: TimeGrid, seed: u64, bridge: bool) -> Result<BackgroundState> {
    simulate_background_with(geom, y0, grid, &mut substream(seed, 0), bridge)
}

pub fn simulate_background_with(geom: &Geometry, y0: f64, grid: TimeGrid, rng: &mut PathRng, bridge: bool) -> Result<BackgroundState> {
    if !(y0 > 0.0 && y0.is_finite()) {
        return invalid(format!("starting height must be positive, got {y0}"));
    }
    let x0 = initial_point(geom, rng);
    let mut bm = x0.clone();
    let mut x = x0;
    let mut b = vec![y0];
    let sd = (2.0 * grid.dt).sqrt();
    let mut tau_index = None;
    for k in 0..grid.steps() {
        let z: f64 = StandardNormal.sample(rng);
        let prev = b[k];
        let next = prev + sd * z;
        geom.step(&mut x, grid.dt, rng);
        bm.extend_from_slice(&x);
        let hit = next <= 0.0 || (bridge && rng.random::<f64>() < bridge_crossing_probability(prev, next, 0.0, grid.dt));
        if hit {
            b.push(0.0);
            tau_index = Some(k + 1);
            break;
        }
        b.push(next);
    }
    Ok(BackgroundState { grid, dim: geom.dim(), bm, b, censored: tau_index.is_none(), tau_index })
}

/// Step-size policy of the streaming simulation.
///
/// Below `fine_below` the vertical motion moves with `dt`, between `fine_below` and
/// `skip_above` with `coarse_dt`; from above `skip_above` it is moved to `skip_above`
/// in one exact first-passage draw while `B^M` takes one exact transition. The
/// integrand of `Y` decays like `e^{−r y}`, so the levels are chosen from the slowest
/// decay rate `r` of the test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layering {
    pub dt: f64,
    pub coarse_dt: f64,
    pub fine_below: f64,
    pub skip_above: f64,
    pub bridge: bool,
    pub t_max: f64,
}

impl Layering {
    /// One step size everywhere and no skipping.
    pub fn uniform(dt: f64, t_max: f64) -> Self {
        Layering { dt, coarse_dt: dt, fine_below: f64::INFINITY, skip_above: f64::INFINITY, bridge: true, t_max }
    }

    /// Fine steps where `e^{−2 r y} > 1e−4`, coarse steps `10 dt` up to `e^{−2 r y} = e^{−18}`.
    pub fn standard(dt: f64, t_max: f64, decay_rate: f64) -> Self {
        let r = decay_rate.max(1e-12);
        Layering { dt, coarse_dt: 10.0 * dt, fine_below: (1e4f64).ln() / (2.0 * r), skip_above: 9.0 / r, bridge: true, t_max }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.coarse_dt >= self.dt && self.fine_below > 0.0 && self.skip_above >= self.fine_below && self.t_max > 0.0) {
            return invalid(format!("inconsistent layering {self:?}"));
        }
        Ok(())
    }

    fn dt_at(&self, b: f64) -> f64 {
        if b < self.fine_below {
            self.dt
        } else {
            self.coarse_dt
        }
    }
}

/// One move of the vertical motion toward the barrier `h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VerticalMove {
    /// Grid step of length `dt` ending at `to`; `hit` when absorbed at `h` during it.
    Step { dt: f64, from: f64, to: f64, hit: bool },
    /// Exact first passage from `from` down to `to` taking time `dt`; `hit` when `to`
    /// is the barrier.
    Skip { dt: f64, from: f64, to: f64, hit: bool },
}

impl VerticalMove {
    pub fn dt(&self) -> f64 {
        match *self {
            VerticalMove::Step { dt, .. } | VerticalMove::Skip { dt, .. } => dt,
        }
    }

    pub fn hit(&self) -> bool {
        match *self {
            VerticalMove::Step { hit, .. } | VerticalMove::Skip { hit, .. } => hit,
        }
    }

    pub fn end(&self) -> f64 {
        match *self {
            VerticalMove::Step { to, .. } | VerticalMove::Skip { to, .. } => to,
        }
    }
}

/// Draws the vertical part of the next move; the caller moves `B^M` by `dt`
/// using the same generator right after (and before the bridge draw, see
/// [`finish_step`]).
pub fn vertical_draw(layering: &Layering, b: f64, h: f64, rng: &mut PathRng) -> VerticalMove {
    let target = layering.skip_above.max(h);
    if b > target {
        let n: f64 = StandardNormal.sample(rng);
        let d = b - target;
        // first passage of a variance-rate-2 motion over distance d
        let dt = d * d / (2.0 * n * n).max(f64::MIN_POSITIVE);
        return VerticalMove::Skip { dt, from: b, to: target, hit: target == h };
    }
    let dt = layering.dt_at(b);
    let z: f64 = StandardNormal.sample(rng);
    VerticalMove::Step { dt, from: b, to: b + (2.0 * dt).sqrt() * z, hit: false }
}

/// Resolves absorption at `h` for a grid step (bridge draw after the `B^M` move).
pub fn finish_step(layering: &Layering, mv: VerticalMove, h: f64, rng: &mut PathRng) -> VerticalMove {
    match mv {
        VerticalMove::Step { dt, from, to, .. } => {
            let hit = to <= h || (layering.bridge && rng.random::<f64>() < bridge_crossing_probability(from, to, h, dt));
            VerticalMove::Step { dt, from, to: if hit { h } else { to }, hit }
        }
        skip => skip,
    }
}
