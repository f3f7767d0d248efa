use super::estimator::{gv_li_estimator, EstimatorConfig, RieszEstimate};
use super::field::TestFunction;
use super::geometry::Geometry;
use crate::error::{invalid, Error, Result};
use crate::rng::child_seed;
use std::f64::consts::TAU;

/// Rows with more low-confidence bins than this are flagged.
pub const MAX_LOW_CONFIDENCE_FRACTION: f64 = 0.1;

/// Single-mode profile in the first coordinate, embedded in each dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepFamily {
    /// `cos(k x_1)` on the torus.
    TorusCos { k: i64 },
    /// `He_k(x_1)` in Gauss space.
    GaussHermite { k: u32 },
}

impl SweepFamily {
    pub fn instance(&self, n: usize) -> Result<(Geometry, TestFunction)> {
        match *self {
            SweepFamily::TorusCos { k } => Ok((Geometry::torus(n)?, TestFunction::cos(n, k))),
            SweepFamily::GaussHermite { k } => Ok((Geometry::gauss(n)?, TestFunction::hermite(n, k))),
        }
    }

    /// `‖f‖_p` under `μ_φ` by midpoint quadrature in the first coordinate.
    pub fn f_norm(&self, p: f64) -> f64 {
        let m = 1 << 16;
        let s: f64 = match *self {
            SweepFamily::TorusCos { k } => (0..m).map(|j| ((k as f64) * TAU * (j as f64 + 0.5) / m as f64).cos().abs().powf(p)).sum::<f64>() / m as f64,
            SweepFamily::GaussHermite { k } => {
                let (lo, hi) = (-14.0f64, 14.0f64);
                let h = (hi - lo) / m as f64;
                (0..m)
                    .map(|j| {
                        let x = lo + h * (j as f64 + 0.5);
                        super::field::hermite(k, x).abs().powf(p) * (-0.5 * x * x).exp() / TAU.sqrt() * h
                    })
                    .sum()
            }
        };
        s.powf(1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub norm: f64,
    pub f_norm: f64,
    pub ratio: f64,
    pub se: f64,
    pub low_confidence_fraction: f64,
    pub flagged: bool,
    pub censored_fraction: f64,
    pub mean_steps: f64,
}

/// `(Σ_b w_b |m_b|^p)^{1/p}` over bins with their `μ_φ` masses, and its delta-method
/// standard error. For `p = 2` the squared standard errors are subtracted first,
/// which removes the upward bias of squared noisy means.
pub fn binned_norm(est: &RieszEstimate, p: f64) -> (f64, f64) {
    let w = est.bins.mass();
    let d = est.dim;
    let mut total = 0.0;
    let mut var = 0.0;
    for b in 0..est.bins.count() {
        let m = &est.mean[b * d..(b + 1) * d];
        let s = &est.se[b * d..(b + 1) * d];
        let len = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        let finite_se = |v: f64| if v.is_finite() { v } else { 0.0 };
        if p == 2.0 {
            total += w * m.iter().zip(s).map(|(mi, si)| mi * mi - finite_se(*si).powi(2)).sum::<f64>();
        } else {
            total += w * len.powf(p);
        }
        if len > 0.0 {
            for (mi, si) in m.iter().zip(s) {
                let g = p * w * len.powf(p - 2.0) * mi;
                var += g * g * finite_se(*si).powi(2);
            }
        }
    }
    let norm = total.max(0.0).powf(1.0 / p);
    let se = if norm > 0.0 { var.sqrt() / (p * norm.powf(p - 1.0)) } else { f64::INFINITY };
    (norm, se)
}

/// Empirical `‖R f‖_p / ‖f‖_p` per dimension, with independent seeds per row.
pub fn dimension_free_sweep(family: SweepFamily, dims: &[usize], p: f64, cfg: &EstimatorConfig) -> Result<Vec<SweepRow>> {
    if dims.is_empty() {
        return invalid("no dimensions to sweep");
    }
    if let Some(n) = dims.iter().find(|n| ![1, 2, 4, 8].contains(*n)) {
        return Err(Error::Unsupported(format!("sweep dimensions are 1, 2, 4 and 8, got {n}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return invalid(format!("exponent must exceed 1, got {p}"));
    }
    let f_norm = family.f_norm(p);
    dims.iter()
        .map(|&n| {
            let (geom, f) = family.instance(n)?;
            let c = EstimatorConfig { seed: child_seed(cfg.seed, n as u64), ..*cfg };
            let est = gv_li_estimator(geom, &f, &c)?;
            let (norm, se) = binned_norm(&est, p);
            let low = est.low_confidence_fraction();
            Ok(SweepRow {
                n,
                norm,
                f_norm,
                ratio: norm / f_norm,
                se: se / f_norm,
                low_confidence_fraction: low,
                flagged: low > MAX_LOW_CONFIDENCE_FRACTION || !est.usable(),
                censored_fraction: est.censored_fraction(),
                mean_steps: est.mean_steps,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub range: f64,
    /// `sqrt(se_max² + se_min²)` of the rows attaining the extreme ratios.
    pub pooled_se: f64,
    pub ok: bool,
}

/// Passes when the spread of ratios is below `3 × pooled_se`.
pub fn trend_report(rows: &[SweepRow]) -> TrendReport {
    let hi = rows.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio));
    let lo = rows.iter().min_by(|a, b| a.ratio.total_cmp(&b.ratio));
    match (hi, lo) {
        (Some(hi), Some(lo)) => {
            let range = hi.ratio - lo.ratio;
            let pooled_se = (hi.se * hi.se + lo.se * lo.se).sqrt();
            TrendReport { range, pooled_se, ok: range < 3.0 * pooled_se && !rows.iter().any(|r| r.flagged) }
        }
        _ => TrendReport { range: f64::NAN, pooled_se: f64::NAN, ok: false },
    }
}
