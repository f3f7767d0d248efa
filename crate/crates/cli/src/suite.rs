//! The acceptance battery and its quick smoke subset.

use crate::commands::{oracle_error, BoxError};
use crate::output::{Outcome, Table};
use crate::trials::{self, PathBatch};
use sparsedom::riesz::estimator::{gv_li_doubling, gv_li_estimator, height_shift, EstimatorConfig};
use sparsedom::riesz::sweep::{dimension_free_sweep, trend_report, SweepFamily};
use sparsedom::riesz::{Geometry, TestFunction};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Acceptance,
    /// Reduced budgets for a smoke run of about a minute.
    Quick,
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "acceptance" => Ok(Scale::Acceptance),
            "quick" => Ok(Scale::Quick),
            other => Err(format!("unknown suite `{other}`; expected acceptance or quick")),
        }
    }
}

pub const SPARSITY_TRIALS: usize = 10_000;
pub const DOMINATION_Y_TRIALS: usize = 10_000;
pub const DOMINATION_Y_PATHS: usize = 100_000;
pub const DOMINATION_CONSTANT_Y: f64 = 8.0;
pub const WEAK_TYPE_PATHS: usize = 100_000;
pub const WEAK_TYPE_LAMBDAS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];
pub const DOMINATION_Z_PATHS: usize = 25_000;
pub const TELESCOPING_TOL: f64 = 1e-10;
pub const WEIGHTED_SPARSE_TRIALS: usize = 10_000;
pub const DOOB_TRIALS: usize = 1_000;
pub const DOOB_EXPONENTS: [f64; 3] = [1.5, 2.0, 3.0];
pub const MAX_TREE_DEPTH: usize = 6;
pub const RIESZ_PATHS: usize = 1_000_000;
pub const RIESZ_Y0: f64 = 8.0;
pub const RIESZ_DT: f64 = 1e-3;
pub const RIESZ_BINS: usize = 64;
pub const TORUS_TOL: f64 = 0.1;
pub const GAUSS_TOL: f64 = 0.15;
pub const SWEEP_PATHS: usize = 100_000;
pub const SWEEP_DIMS: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("criterion {} [{}] {}: {} ({:.1} s)", self.id, if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail, self.seconds)
    }
}

pub const NAMES: [&str; 9] = [
    "sparsity (exact)",
    "domination for Y",
    "weak type for Z",
    "domination for Z",
    "weighted sparse L2",
    "weighted Doob maximal",
    "Riesz on the circle",
    "Gauss eigenfunction",
    "dimension-free trend",
];

fn scaled(scale: Scale, full: usize, quick: usize) -> usize {
    match scale {
        Scale::Acceptance => full,
        Scale::Quick => quick,
    }
}

fn riesz_config(scale: Scale, seed: u64) -> EstimatorConfig {
    match scale {
        Scale::Acceptance => EstimatorConfig { y0: RIESZ_Y0, dt: RIESZ_DT, paths: RIESZ_PATHS, bins: RIESZ_BINS, seed, ..EstimatorConfig::default() },
        Scale::Quick => EstimatorConfig { y0: 4.0, dt: 1e-2, paths: 20_000, bins: 16, seed, ..EstimatorConfig::default() },
    }
}

/// Runs one criterion; `seed` offsets every stream it uses.
pub fn run_criterion(id: u8, scale: Scale, seed: u64) -> Result<CriterionResult, BoxError> {
    let start = Instant::now();
    let (pass, detail) = match id {
        1 => {
            let s = trials::sparsity_battery(scaled(scale, SPARSITY_TRIALS, 300), MAX_TREE_DEPTH, seed)?;
            (s.ok(), format!("{} trees, {} atoms, {} violations, max atom ratio {:.6}", s.trials, s.checked, s.violations, s.max_ratio))
        }
        2 => {
            let t = trials::domination_y_tree_battery(scaled(scale, DOMINATION_Y_TRIALS, 300), MAX_TREE_DEPTH, DOMINATION_CONSTANT_Y, seed)?;
            let batch = PathBatch { paths: scaled(scale, DOMINATION_Y_PATHS, 2_000), ..PathBatch::default() };
            let m = trials::domination_y_mc(&batch, DOMINATION_CONSTANT_Y, seed + 1)?;
            (t.ok() && m.ok(), format!("tree: {} violations over {} leaf paths (worst Y*/S {:.4}); mc: {} violations over {} paths (worst {:.4})", t.violations, t.checked, t.max_ratio, m.violations, m.trials, m.max_ratio))
        }
        3 => {
            let batch = PathBatch { paths: scaled(scale, WEAK_TYPE_PATHS, 5_000), ..PathBatch::default() };
            let mut ok = true;
            let mut parts = Vec::new();
            for (k, (a, jumps)) in [(0.0, false), (0.5, false), (0.0, true), (0.5, true)].into_iter().enumerate() {
                let c = trials::weak_type_battery(&batch, a, jumps, &WEAK_TYPE_LAMBDAS, seed + k as u64)?;
                ok &= c.ok();
                let worst = c.rows.iter().map(|r| r.empirical / r.bound).fold(0.0, f64::max);
                parts.push(format!("a={a} jumps={jumps}: {} (worst empirical/bound {:.4}, excluded {})", if c.ok() { "ok" } else { "fail" }, worst, c.excluded));
            }
            (ok, parts.join("; "))
        }
        4 => {
            let batch = PathBatch { paths: scaled(scale, DOMINATION_Z_PATHS, 1_000), ..PathBatch::default() };
            let mut ok = true;
            let mut parts = Vec::new();
            for (k, (a, jumps)) in [(0.0, false), (0.5, false), (0.0, true), (0.5, true)].into_iter().enumerate() {
                let c = if jumps { 8.0 } else { 4.0 };
                let s = trials::domination_z_mc(&batch, a, jumps, c, TELESCOPING_TOL, seed + k as u64)?;
                ok &= s.ok(TELESCOPING_TOL);
                parts.push(format!("a={a} jumps={jumps} C={c}: {} violations, worst Z*/S {:.4}, telescoping {:.2e}", s.domination.violations, s.domination.max_ratio, s.max_telescoping));
            }
            (ok, parts.join("; "))
        }
        5 => {
            let s = trials::weighted_sparse_battery(scaled(scale, WEIGHTED_SPARSE_TRIALS, 300), MAX_TREE_DEPTH, seed)?;
            (s.ok(), format!("{} triples, {} violations, max ratio {:.4}", s.trials, s.violations, s.max_ratio))
        }
        6 => {
            let mut ok = true;
            let mut parts = Vec::new();
            for p in DOOB_EXPONENTS {
                let s = trials::doob_battery(p, scaled(scale, DOOB_TRIALS, 100), MAX_TREE_DEPTH, seed)?;
                ok &= s.ok();
                parts.push(format!("p={p}: {} violations, max ratio {:.4}", s.violations, s.max_ratio));
            }
            (ok, parts.join("; "))
        }
        7 => {
            let f = TestFunction::cos(1, 1);
            let cfg = riesz_config(scale, seed);
            let (a, b) = gv_li_doubling(Geometry::Torus { n: 1 }, &f, &cfg)?;
            let err = oracle_error(&a, &f).ok_or("no oracle for the torus run")?.1;
            let h = height_shift(&a, &b);
            let tol = if scale == Scale::Quick { 0.25 } else { TORUS_TOL };
            (err <= tol && h.ok && a.usable() && b.usable(), format!("relative L2 error {err:.5} (tol {tol}); doubling: max shift {:.3e}, worst shift/pooled se {:.3} at bin {}", h.max_shift, h.worst_ratio, h.worst_bin))
        }
        8 => {
            let f = TestFunction::hermite(1, 2);
            let est = gv_li_estimator(Geometry::Gauss { n: 1 }, &f, &riesz_config(scale, seed))?;
            let err = oracle_error(&est, &f).ok_or("no oracle for the Gauss run")?.1;
            let tol = if scale == Scale::Quick { 0.3 } else { GAUSS_TOL };
            (err <= tol && est.usable(), format!("relative L2(gamma) error {err:.5} (tol {tol}), censored {}", est.censored))
        }
        9 => {
            let cfg = EstimatorConfig { paths: scaled(scale, SWEEP_PATHS, 3_000), ..riesz_config(scale, seed) };
            let rows = dimension_free_sweep(SweepFamily::TorusCos { k: 1 }, &SWEEP_DIMS, 2.0, &cfg)?;
            let rep = trend_report(&rows);
            let ratios: Vec<String> = rows.iter().map(|r| format!("n={}: {:.4}±{:.4}", r.n, r.ratio, r.se)).collect();
            (rep.ok, format!("{}; range {:.4} vs 3 x pooled se {:.4}", ratios.join(", "), rep.range, 3.0 * rep.pooled_se))
        }
        other => return Err(format!("no criterion {other}").into()),
    };
    Ok(CriterionResult { id, name: NAMES[id as usize - 1], pass, detail, seconds: start.elapsed().as_secs_f64() })
}

/// All criteria in order; each result line is printed as soon as it is known.
pub fn run_suite(scale: Scale, seed: u64) -> Result<(Vec<CriterionResult>, Outcome), BoxError> {
    let mut results = Vec::new();
    let mut out = Outcome::default();
    let mut t = Table::new("suite", &["criterion", "name", "pass", "detail"]);
    for id in 1..=9u8 {
        let r = run_criterion(id, scale, seed.wrapping_add(1000 * id as u64))?;
        println!("{}", r.line());
        t.push([r.id.to_string(), r.name.to_string(), r.pass.to_string(), r.detail.clone()]);
        out.check(r.pass, format!("criterion {}", r.id));
        results.push(r);
    }
    out.note("suite", if scale == Scale::Quick { "quick" } else { "acceptance" });
    out.tables.push(t);
    Ok((results, out))
}
