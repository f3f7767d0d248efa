//! One function per command: read the resolved config, run, tabulate, decide.

use crate::config::{Command, RunConfig};
use crate::output::{Outcome, Table};
use crate::trials::{self, BatterySummary, PathBatch};
use sparsedom::riesz::estimator::{bin_targets, gv_li_doubling, gv_li_estimator, height_shift, relative_l2_error, EstimatorConfig, RieszEstimate};
use sparsedom::riesz::sweep::{binned_norm, dimension_free_sweep, trend_report, SweepFamily};
use sparsedom::riesz::{Geometry, TestFunction};
use sparsedom::treespace::TreeSpace;
use sparsedom::weights::{extrapolate_bound, sharpness_probe};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

pub fn run(cfg: &RunConfig) -> Result<Outcome, BoxError> {
    let mut out = Outcome::default();
    match cfg.command {
        Command::WeakType => weak_type(cfg, &mut out)?,
        Command::Sparsity => sparsity(cfg, &mut out)?,
        Command::DominationY => domination_y(cfg, &mut out)?,
        Command::DominationZ => domination_z(cfg, &mut out)?,
        Command::ApSweep => ap_sweep(cfg, &mut out)?,
        Command::DoobSweep => doob_sweep(cfg, &mut out)?,
        Command::SparseWeighted => sparse_weighted(cfg, &mut out)?,
        Command::Extrapolate => extrapolate(cfg, &mut out)?,
        Command::Riesz => riesz(cfg, &mut out)?,
        Command::DimSweep => dim_sweep(cfg, &mut out)?,
    }
    Ok(out)
}

fn engine(cfg: &RunConfig, allowed: &[&str]) -> Result<String, BoxError> {
    let e = cfg.raw("engine").to_ascii_lowercase();
    if !allowed.contains(&e.as_str()) {
        return Err(format!("engine `{e}` is not available for `{}`; use {}", cfg.command.name(), allowed.join(" or ")).into());
    }
    Ok(e)
}

fn batch(cfg: &RunConfig) -> Result<PathBatch, BoxError> {
    Ok(PathBatch { paths: cfg.usize("paths")?, t_max: cfg.f64("t_max")?, dt: cfg.f64("dt")?, jump_rate: cfg.f64("jump_rate")?, ..PathBatch::default() })
}

fn battery_table(name: &str) -> Table {
    Table::new(name, &["case", "trials", "checked", "violations", "max_ratio", "first_violation"])
}

fn battery_row(t: &mut Table, case: &str, s: &BatterySummary) {
    t.push([case.to_string(), s.trials.to_string(), s.checked.to_string(), s.violations.to_string(), s.max_ratio.to_string(), s.witness.map_or(String::new(), |w| w.to_string())]);
}

fn weak_type(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    engine(cfg, &["mc"])?;
    let b = batch(cfg)?;
    let (a, jumps) = (cfg.f64("a")?, cfg.bool("jumps")?);
    let curve = trials::weak_type_battery(&b, a, jumps, &cfg.f64_list("lambdas")?, cfg.u64("seed")?)?;
    let mut t = Table::new("weak_type", &["lambda", "empirical", "bound", "sigma", "ok"]);
    for r in &curve.rows {
        t.push([r.lambda.to_string(), r.empirical.to_string(), r.bound.to_string(), r.sigma.to_string(), r.ok.to_string()]);
        out.check(r.ok, format!("lambda {}: empirical {} above bound {} (1 + 3 sigma)", r.lambda, r.empirical, r.bound));
    }
    out.check(curve.excluded == 0, format!("{} paths violate the hypotheses", curve.excluded));
    out.note("l1_norm", curve.l1_norm);
    out.note("paths_used", curve.used);
    out.note("tolerance.rule", "empirical <= bound * (1 + 3 sigma)");
    out.tables.push(t);
    Ok(())
}

fn sparsity(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    let seed = cfg.u64("seed")?;
    let mut t = battery_table("sparsity");
    if engine(cfg, &["tree", "mc"])? == "tree" {
        let s = if cfg.is_set("tree_file") {
            let text = std::fs::read_to_string(cfg.raw("tree_file")).map_err(|e| format!("cannot read tree file `{}`: {e}", cfg.raw("tree_file")))?;
            let space = TreeSpace::parse_text(&text)?;
            out.note("tree.leaves", space.n_leaves());
            trials::sparsity_battery_on(&space, cfg.usize("trials")?, seed)?
        } else {
            trials::sparsity_battery(cfg.usize("trials")?, cfg.usize("max_depth")?, seed)?
        };
        battery_row(&mut t, "tree", &s);
        out.check(s.ok(), format!("{} trials with an atom above one half (first: {:?})", s.violations, s.witness));
        out.note("tolerance.atom_excess", 1e-12);
    } else {
        let r = trials::sparsity_mc(&batch(cfg)?, cfg.usize("bins")?, seed)?;
        t = Table::new("sparsity", &["case", "atoms_checked", "atoms_skipped", "max_ratio", "worst_excess", "ok"]);
        t.push(["mc".to_string(), r.atoms_checked.to_string(), r.atoms_skipped.to_string(), r.max_ratio.to_string(), r.worst_excess.to_string(), r.ok.to_string()]);
        out.check(r.ok, format!("binned atom {:?} above one half plus three binomial errors", r.witness));
        out.note("tolerance.rule", "ratio <= 1/2 + 3 sqrt(1/(4 n)) per cell");
    }
    out.tables.push(t);
    Ok(())
}

fn domination_y(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    let seed = cfg.u64("seed")?;
    let c = cfg.f64("constant")?;
    let s = if engine(cfg, &["tree", "mc"])? == "tree" {
        trials::domination_y_tree_battery(cfg.usize("trials")?, cfg.usize("max_depth")?, c, seed)?
    } else {
        trials::domination_y_mc(&batch(cfg)?, c, seed)?
    };
    let mut t = battery_table("domination_y");
    battery_row(&mut t, cfg.raw("engine"), &s);
    out.check(s.ok(), format!("{} paths with Y* above {c} S(X)", s.violations));
    out.note("tolerance.relative", 1e-9);
    out.tables.push(t);
    Ok(())
}

fn domination_z(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    engine(cfg, &["mc"])?;
    let jumps = cfg.bool("jumps")?;
    let c = if cfg.is_set("constant") { cfg.f64("constant")? } else if jumps { 8.0 } else { 4.0 };
    let tol = cfg.f64("telescoping_tol")?;
    let s = trials::domination_z_mc(&batch(cfg)?, cfg.f64("a")?, jumps, c, tol, cfg.u64("seed")?)?;
    let mut t = battery_table("domination_z");
    battery_row(&mut t, if jumps { "jumps" } else { "continuous" }, &s.domination);
    out.check(s.domination.ok(), format!("{} paths with Z* above {c} S", s.domination.violations));
    out.check(s.max_telescoping <= tol, format!("telescoping residual {} above {tol}", s.max_telescoping));
    out.note("constant", c);
    out.note("max_telescoping", s.max_telescoping);
    out.note("tolerance.telescoping", tol);
    out.tables.push(t);
    Ok(())
}

fn ap_sweep(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    engine(cfg, &["tree"])?;
    let mut t = battery_table("ap_sweep");
    let mut sharp = Table::new("sharpness", &["p", "depth", "q", "ratio_full", "ratio_half"]);
    for p in cfg.f64_list("p")? {
        let s = trials::ap_battery(p, cfg.usize("trials")?, cfg.usize("max_depth")?, cfg.u64("seed")?)?;
        battery_row(&mut t, &format!("p={p}"), &s);
        out.check(s.ok(), format!("p = {p}: node maximum differs from enumeration"));
        for r in sharpness_probe(p, &[2, 4, 6, 8, 10, 12])? {
            sharp.push([p.to_string(), r.depth.to_string(), r.q.to_string(), r.ratio_full.to_string(), r.ratio_half.to_string()]);
        }
    }
    out.note("tolerance.relative_gap", 1e-12);
    out.tables.push(t);
    out.tables.push(sharp);
    Ok(())
}

fn doob_sweep(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    engine(cfg, &["tree"])?;
    let mut t = battery_table("doob_sweep");
    for p in cfg.f64_list("p")? {
        let s = trials::doob_battery(p, cfg.usize("trials")?, cfg.usize("max_depth")?, cfg.u64("seed")?)?;
        battery_row(&mut t, &format!("p={p}"), &s);
        out.check(s.ok(), format!("p = {p}: {} violations", s.violations));
    }
    out.note("tolerance.relative", 1e-12);
    out.tables.push(t);
    Ok(())
}

fn sparse_weighted(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    engine(cfg, &["tree"])?;
    let s = trials::weighted_sparse_battery(cfg.usize("trials")?, cfg.usize("max_depth")?, cfg.u64("seed")?)?;
    let mut t = battery_table("sparse_weighted");
    battery_row(&mut t, "p=2", &s);
    out.check(s.ok(), format!("{} violations", s.violations));
    out.note("tolerance.relative", 1e-12);
    out.tables.push(t);
    Ok(())
}

fn extrapolate(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    let (r, p, b) = (cfg.f64("r")?, cfg.f64("p")?, cfg.f64("b")?);
    let base = cfg.raw("base");
    let slope = match base {
        "sparse" => 8.0,
        other => other
            .strip_prefix("linear:")
            .and_then(|c| c.parse::<f64>().ok())
            .ok_or_else(|| format!("key `base`: expected `sparse` or `linear:C`, got `{other}`"))?,
    };
    let v = extrapolate_bound(&|a| slope * a, r, p, b)?;
    let mut t = Table::new("extrapolate", &["r", "p", "b", "base_slope", "bound"]);
    t.push([r.to_string(), p.to_string(), b.to_string(), slope.to_string(), v.to_string()]);
    out.note("bound", v);
    out.tables.push(t);
    Ok(())
}

pub fn geometry(name: &str, n: usize, alpha: f64) -> Result<Geometry, BoxError> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "torus" | "euclidean" => Geometry::torus(n)?,
        "gauss" => Geometry::gauss(n)?,
        "bessel" => Geometry::bessel(alpha)?,
        other => return Err(format!("key `geometry`: unknown geometry `{other}`").into()),
    })
}

fn estimator_config(cfg: &RunConfig) -> Result<EstimatorConfig, BoxError> {
    Ok(EstimatorConfig {
        y0: cfg.f64("y0")?,
        dt: cfg.f64("dt")?,
        t_max: cfg.f64("t_max")?,
        paths: cfg.usize("paths")?,
        bins: cfg.usize("bins")?,
        seed: cfg.u64("seed")?,
        ..EstimatorConfig::default()
    })
}

/// Per-bin table with every component, its standard error and (when available) the target.
pub fn bins_table(name: &str, est: &RieszEstimate, target: Option<&[f64]>) -> Table {
    let mut header = vec!["bin".to_string(), "lo".into(), "hi".into(), "center".into(), "count".into()];
    for i in 0..est.dim {
        header.push(format!("estimate_{i}"));
        header.push(format!("stderr_{i}"));
    }
    header.push("target_0".into());
    header.push("low_confidence".into());
    let low = est.low_confidence();
    let mut t = Table { name: name.into(), header, rows: Vec::new() };
    for b in 0..est.bins.count() {
        let mut row = vec![b.to_string(), est.bins.edges[b].to_string(), est.bins.edges[b + 1].to_string(), est.bins.center(b).to_string(), est.counts[b].to_string()];
        for i in 0..est.dim {
            row.push(est.mean[b * est.dim + i].to_string());
            row.push(est.se[b * est.dim + i].to_string());
        }
        row.push(target.map_or(String::new(), |t| t[b].to_string()));
        row.push(low[b].to_string());
        t.rows.push(row);
    }
    t
}

/// Relative L2 error of the first component against the oracle, when one exists.
pub fn oracle_error(est: &RieszEstimate, f: &TestFunction) -> Option<(Vec<f64>, f64)> {
    let target = bin_targets(&est.geometry, f, &est.bins).ok()?;
    let w = vec![est.bins.mass(); est.bins.count()];
    let e = relative_l2_error(&est.component(0), &target, &w);
    Some((target, e))
}

fn riesz(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    let geom = geometry(cfg.raw("geometry"), cfg.usize("n")?, cfg.f64("alpha")?)?;
    let f = TestFunction::parse(cfg.raw("f"), geom.dim())?;
    let ec = estimator_config(cfg)?;
    let tol = if cfg.is_set("tol") { cfg.f64("tol")? } else if matches!(geom, Geometry::Gauss { .. }) { 0.15 } else { 0.1 };
    let (est, high) = if cfg.bool("doubling")? {
        let (a, b) = gv_li_doubling(geom, &f, &ec)?;
        (a, Some(b))
    } else {
        (gv_li_estimator(geom, &f, &ec)?, None)
    };
    let oracle = oracle_error(&est, &f);
    out.tables.push(bins_table("riesz_bins", &est, oracle.as_ref().map(|o| o.0.as_slice())));
    match &oracle {
        Some((_, e)) => {
            println!("relative L2 error vs oracle: {e:.6}");
            out.note("relative_l2_error", e);
            out.check(*e <= tol, format!("relative L2 error {e} above {tol}"));
        }
        None => out.note("relative_l2_error", "unavailable"),
    }
    let (chi2, z) = est.invariant_measure_chi2();
    let (norm, norm_se) = binned_norm(&est, cfg.f64("p")?);
    out.note("tolerance.relative_l2", tol);
    out.note("censored_fraction", est.censored_fraction());
    out.note("tolerance.censored_fraction", sparsedom::riesz::estimator::MAX_CENSORED_FRACTION);
    out.check(est.usable(), format!("censored fraction {} too large", est.censored_fraction()));
    out.note("low_confidence_fraction", est.low_confidence_fraction());
    out.note("chi2", chi2);
    out.note("chi2_z", z);
    out.note("binned_norm", norm);
    out.note("binned_norm_se", norm_se);
    out.note("mean_steps", est.mean_steps);
    out.note("layering.fine_below", est.layering.fine_below);
    out.note("layering.skip_above", est.layering.skip_above);
    out.note("layering.coarse_dt", est.layering.coarse_dt);
    out.note("layering.bridge", est.layering.bridge);
    if let Some(h) = high {
        let rep = height_shift(&est, &h);
        out.tables.push(bins_table("riesz_bins_doubled", &h, oracle.as_ref().map(|o| o.0.as_slice())));
        out.note("doubling.worst_ratio", rep.worst_ratio);
        out.note("doubling.max_shift", rep.max_shift);
        out.note("doubling.worst_bin", rep.worst_bin);
        out.check(rep.ok, format!("doubling shifts bin {} by {} (ratio {} to the pooled error)", rep.worst_bin, rep.max_shift, rep.worst_ratio));
    }
    Ok(())
}

fn dim_sweep(cfg: &RunConfig, out: &mut Outcome) -> Result<(), BoxError> {
    let family = match cfg.raw("family") {
        "torus" => SweepFamily::TorusCos { k: if cfg.is_set("k") { cfg.u64("k")? as i64 } else { 1 } },
        "gauss" => SweepFamily::GaussHermite { k: if cfg.is_set("k") { cfg.u64("k")? as u32 } else { 2 } },
        other => return Err(format!("key `family`: expected torus or gauss, got `{other}`").into()),
    };
    let ec = EstimatorConfig { y0: cfg.f64("y0")?, dt: cfg.f64("dt")?, t_max: cfg.f64("t_max")?, paths: cfg.usize("paths")?, bins: cfg.usize("bins")?, seed: cfg.u64("seed")?, ..EstimatorConfig::default() };
    let rows = dimension_free_sweep(family, &cfg.usize_list("dims")?, cfg.f64("p")?, &ec)?;
    let mut t = Table::new("dim_sweep", &["n", "ratio", "se", "norm", "f_norm", "low_confidence_fraction", "flagged", "censored_fraction", "mean_steps"]);
    for r in &rows {
        t.push([r.n.to_string(), r.ratio.to_string(), r.se.to_string(), r.norm.to_string(), r.f_norm.to_string(), r.low_confidence_fraction.to_string(), r.flagged.to_string(), r.censored_fraction.to_string(), r.mean_steps.to_string()]);
    }
    let rep = trend_report(&rows);
    out.note("range", rep.range);
    out.note("pooled_se", rep.pooled_se);
    out.note("tolerance.rule", "range < 3 * sqrt(se_max^2 + se_min^2)");
    out.check(rep.ok, format!("ratio range {} not below 3 x pooled error {}", rep.range, rep.pooled_se));
    out.tables.push(t);
    Ok(())
}
