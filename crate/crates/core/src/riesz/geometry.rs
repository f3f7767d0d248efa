use crate::error::{invalid, Result};
use crate::paths::TimeGrid;
use crate::rng::PathRng;
use crate::zprocess::{DriftSpec, VSource};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::TAU;

/// The three example geometries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// `[0, 2π)^n` with the normalized uniform measure and `φ = 0`.
    Torus { n: usize },
    /// `R^n` with `φ(x) = |x|²/2 + (n/2) log 2π`, so `μ_φ` is the standard Gaussian.
    Gauss { n: usize },
    /// `(0, ∞)` with `φ(x) = −2α ln x`.
    Bessel { alpha: f64 },
}

impl Geometry {
    pub fn torus(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Geometry::Torus { n })
    }

    pub fn gauss(n: usize) -> Result<Self> {
        check_dim(n)?;
        Ok(Geometry::Gauss { n })
    }

    pub fn bessel(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return invalid(format!("Bessel parameter must be nonnegative, got {alpha}"));
        }
        Ok(Geometry::Bessel { alpha })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Geometry::Torus { n } | Geometry::Gauss { n } => n,
            Geometry::Bessel { .. } => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Torus { .. } => "torus",
            Geometry::Gauss { .. } => "gauss",
            Geometry::Bessel { .. } => "bessel",
        }
    }

    /// `b(x) = −∇φ(x)`.
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Geometry::Torus { n } => vec![0.0; n],
            Geometry::Gauss { .. } => x.iter().map(|v| -v).collect(),
            Geometry::Bessel { alpha } => vec![2.0 * alpha / x[0]],
        }
    }

    /// `V` for the torus and Gauss geometries; the Bessel curvature depends on the
    /// state and is built along a driver with [`DriftSpec::bessel`].
    pub fn drift_spec(&self) -> Result<DriftSpec> {
        match *self {
            Geometry::Torus { n } => Ok(DriftSpec::zero(n)),
            Geometry::Gauss { n } => DriftSpec::new(0.0, n, VSource::ScaledIdentity(-1.0)),
            Geometry::Bessel { .. } => invalid("the Bessel curvature is state dependent; use DriftSpec::bessel on a driver path"),
        }
    }

    /// Scalar `c` with `V = c I`, when constant.
    pub fn scalar_curvature(&self) -> Option<f64> {
        match self {
            Geometry::Torus { .. } => Some(0.0),
            Geometry::Gauss { .. } => Some(-1.0),
            Geometry::Bessel { .. } => None,
        }
    }

    pub fn has_invariant_probability(&self) -> bool {
        !matches!(self, Geometry::Bessel { .. })
    }

    /// Draw from `μ_φ` (torus and Gauss); the Bessel measure `x^{2α} dx` is infinite.
    pub fn sample_invariant(&self, rng: &mut PathRng, out: &mut [f64]) -> Result<()> {
        match self {
            Geometry::Torus { .. } => out.iter_mut().for_each(|v| *v = rng.random::<f64>() * TAU),
            Geometry::Gauss { .. } => out.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
            Geometry::Bessel { .. } => return invalid("the Bessel invariant measure is not a probability measure"),
        }
        Ok(())
    }

    /// CDF of the first coordinate under `μ_φ`.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        match self {
            Geometry::Torus { .. } => (x / TAU).clamp(0.0, 1.0),
            Geometry::Gauss { .. } => crate::sparse::normal_cdf(x),
            Geometry::Bessel { .. } => f64::NAN,
        }
    }

    /// Moves `x` over time `dt` with the geometry's diffusion (generator `Δ_φ`):
    /// exact transitions on the torus and in Gauss space, reflected Euler for Bessel.
    pub fn step(&self, x: &mut [f64], dt: f64, rng: &mut PathRng) {
        match *self {
            Geometry::Torus { .. } => {
                let sd = (2.0 * dt).sqrt();
                for v in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = (*v + sd * z).rem_euclid(TAU);
                }
            }
            Geometry::Gauss { .. } => {
                let decay = (-dt).exp();
                let sd = (-(-2.0 * dt).exp_m1()).sqrt();
                for v in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = decay * *v + sd * z;
                }
            }
            Geometry::Bessel { alpha } => {
                let z: f64 = StandardNormal.sample(rng);
                let floor = dt.sqrt() * 1e-3;
                x[0] = (x[0] + 2.0 * alpha / x[0].max(floor) * dt + (2.0 * dt).sqrt() * z).abs();
            }
        }
    }

    /// `B^M` on a uniform grid from `x0`.
    pub fn simulate(&self, grid: TimeGrid, x0: &[f64], rng: &mut PathRng) -> Vec<f64> {
        let d = x0.len();
        let mut out = Vec::with_capacity((grid.steps() + 1) * d);
        out.extend_from_slice(x0);
        let mut x = x0.to_vec();
        for _ in 0..grid.steps() {
            self.step(&mut x, grid.dt, rng);
            out.extend_from_slice(&x);
        }
        out
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > 64 {
        return invalid(format!("dimension must lie in 1..=64, got {n}"));
    }
    Ok(())
}
