//! Subcommand implementations. Each returns the ids of failed checks.

use std::path::{Path, PathBuf};

use jumplab::sizeest::SizeCalibration;
use jumplab::verify::{CalibrationSet, SUMMARY_HEADER};
use jumplab::{Error, Result};
use serde::Serialize;

use crate::config::{Config, Reference};
use crate::experiments as ex;
use crate::output::{solution_csvs, text_table, write_atomic, write_json, write_jsonl};
use crate::{report, Command, Common};

pub fn dispatch(cmd: &Command) -> Result<Vec<String>> {
    match cmd {
        Command::Solve(c) => solve(&Ctx::new(c)?),
        Command::VerifyThreeRegion(c) => three_region(&Ctx::new(c)?),
        Command::VerifyThreeSphere(c) => three_sphere(&Ctx::new(c)?),
        Command::VerifyCarleman(c) => carleman(&Ctx::new(c)?),
        Command::Propagate(c) => propagate(&Ctx::new(c)?),
        Command::Calibrate(c) => calibrate(&Ctx::new(c)?),
        Command::SizeEstimate { common, archive } => size_estimate(&Ctx::new(common)?, archive.as_deref()),
        Command::Report { paths, out } => report_cmd(paths, out),
    }
}

/// Config with the command-line overrides applied.
pub struct Ctx {
    pub cfg: Config,
    pub h: f64,
    pub seed: Option<u64>,
    pub safety: f64,
    pub out: PathBuf,
}

impl Ctx {
    pub fn new(c: &Common) -> Result<Self> {
        let mut cfg = Config::load(&c.config)?;
        if let Some(h) = c.mesh_h {
            cfg.mesh.h = h;
        }
        if let Some(s) = c.safety {
            cfg.safety = Some(s);
        }
        if c.seed.is_some() {
            cfg.seed = c.seed;
        }
        cfg.validate()?;
        Ok(Ctx {
            h: cfg.mesh.h,
            seed: cfg.seed,
            safety: cfg.safety.unwrap_or(ex::DEFAULT_SAFETY),
            out: c.out.clone(),
            cfg,
        })
    }

    /// Ensemble commands refuse to run without an explicit seed.
    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidInput("ensemble commands need a seed (--seed or `seed` in the config)".into()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    name: &'a str,
    mesh_h: f64,
    vertices: usize,
    triangles: usize,
    min_angle_deg: f64,
    method: &'static str,
    iterations: usize,
    residual: f64,
    energy: f64,
    max_nodal_error: Option<f64>,
}

fn solve(ctx: &Ctx) -> Result<Vec<String>> {
    let sol = ex::solve_scenario(&ctx.cfg, ctx.h)?;
    let data = ctx.cfg.boundary()?.clone();
    let err = ctx
        .cfg
        .solve
        .reference
        .map(|Reference::BoundaryData| ex::max_nodal_error(&sol, &|p| data.eval(p)));
    let (nodes, elems) = solution_csvs(&sol);
    write_atomic(&ctx.path("nodes.csv"), nodes.as_bytes())?;
    write_atomic(&ctx.path("elements.csv"), elems.as_bytes())?;
    write_atomic(&ctx.path("mesh.txt"), sol.mesh.to_text().as_bytes())?;
    let summary = SolveSummary {
        name: &ctx.cfg.name,
        mesh_h: ctx.h,
        vertices: sol.mesh.n_vertices(),
        triangles: sol.mesh.n_triangles(),
        min_angle_deg: sol.mesh.min_angle_deg(),
        method: sol.stats.method.name(),
        iterations: sol.stats.iterations,
        residual: sol.stats.residual,
        energy: jumplab::functionals::energy(&sol, None),
        max_nodal_error: err,
    };
    write_json(&ctx.path("solve.json"), &summary)?;
    println!(
        "solved {} nodes, {} triangles ({})",
        summary.vertices, summary.triangles, summary.method
    );
    let mut failures = Vec::new();
    if let Some(e) = err {
        println!("max nodal error {e:.3e}");
        if let Some(limit) = ctx.cfg.solve.max_nodal_error {
            if !(e <= limit) {
                failures.push(format!("max_nodal_error={e:e}>{limit:e}"));
            }
        }
    }
    Ok(failures)
}

/// Replaces this inequality's row in `summary.csv`, keeping other rows.
fn merge_summary(path: &Path, set: &CalibrationSet) -> Result<()> {
    let mut rows: Vec<String> = match std::fs::read_to_string(path) {
        Ok(text) => text.lines().skip(1).filter(|l| !l.is_empty()).map(str::to_string).collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    rows.retain(|r| r.split(',').next() != Some(set.inequality.as_str()));
    rows.push(set.summary_row());
    rows.sort();
    let mut text = format!("{SUMMARY_HEADER}\n");
    for r in rows {
        text.push_str(&r);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

fn finish_ensemble(ctx: &Ctx, set: &CalibrationSet, ledger: &str) -> Result<Vec<String>> {
    let reports: Vec<_> = set.reports().collect();
    write_jsonl(&ctx.path(ledger), &reports)?;
    merge_summary(&ctx.path("summary.csv"), set)?;
    let row = vec![
        set.inequality.clone(),
        set.fit.len().to_string(),
        set.holdout.len().to_string(),
        format!("{:.4e}", set.fitted_constant),
        format!("{:.3}", set.holdout_pass_rate),
        format!("{:.4e}", set.max_holdout_ratio),
    ];
    print!(
        "{}",
        text_table(&["inequality", "n_fit", "n_holdout", "constant", "pass_rate", "max_holdout"], &[row])
    );
    Ok(set.failing_ids().into_iter().map(str::to_string).collect())
}

fn three_region(ctx: &Ctx) -> Result<Vec<String>> {
    let seed = ctx.seed()?;
    let run = ex::three_region_ensemble(&ctx.cfg, seed, ctx.h)?;
    let set = ex::calibrate_reports(&ctx.cfg, run.reports, seed, ctx.safety)?;
    finish_ensemble(ctx, &set, "three_region.reports.jsonl")
}

fn three_sphere(ctx: &Ctx) -> Result<Vec<String>> {
    let seed = ctx.seed()?;
    let run = ex::three_sphere_ensemble(&ctx.cfg, seed, ctx.h)?;
    let set = ex::calibrate_reports(&ctx.cfg, run.reports, seed, ctx.safety)?;
    finish_ensemble(ctx, &set, "three_sphere.reports.jsonl")
}

fn carleman(ctx: &Ctx) -> Result<Vec<String>> {
    let records = ex::carleman_pairs(&ctx.cfg)?;
    write_jsonl(&ctx.path("carleman.jsonl"), &records)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                r.pair.clone(),
                format!("{:.4e}", r.coarse.max_ratio),
                format!("{:.4e}", r.fine.max_ratio),
                format!("{:.2}%", 100.0 * r.relative_change),
                if r.pass { "ok" } else { "FAIL" }.into(),
            ]
        })
        .collect();
    print!("{}", text_table(&["pair", "max_ratio", "refined", "change", "status"], &rows));
    Ok(records.iter().filter(|r| !r.pass).map(|r| r.pair.clone()).collect())
}

fn propagate(ctx: &Ctx) -> Result<Vec<String>> {
    let seed = ctx.seed()?;
    let records = ex::propagation_ensemble(&ctx.cfg, seed, ctx.h)?;
    write_jsonl(&ctx.path("propagation.jsonl"), &records)?;
    let c = records.iter().map(|r| r.result.constant).fold(f64::INFINITY, f64::min);
    println!("C(rho={}) = {c:.6e} over {} members", ctx.cfg.propagation.rho, records.len());
    if let Some(worst) = records.iter().filter_map(|r| r.relative_change).reduce(f64::max) {
        println!("largest change under h -> h/2: {:.2}%", 100.0 * worst);
    }
    Ok(records.iter().filter(|r| !r.pass).map(|r| r.id.clone()).collect())
}

fn archive_path(ctx: &Ctx, explicit: Option<&Path>) -> Result<PathBuf> {
    Ok(match explicit {
        Some(p) => p.to_path_buf(),
        None => ctx.path(&ctx.cfg.size()?.archive),
    })
}

fn calibrate(ctx: &Ctx) -> Result<Vec<String>> {
    let seed = ctx.seed()?;
    let family = ex::size_family(&ctx.cfg, seed, ctx.h, true)?;
    let cal = ex::calibrate_family(&ctx.cfg, &family, seed, ctx.safety)?;
    write_jsonl(&ctx.path("family.jsonl"), &family.members)?;
    write_jsonl(&ctx.path("energy_lemma.jsonl"), &family.energy)?;
    let path = archive_path(ctx, None)?;
    write_json(&path, &cal)?;
    println!(
        "{} calibration: K1 = {:.4e}, K2 = {:.4e}, p = {:.4}, holdout containment {:.3} ({} excluded)",
        cal.mode,
        cal.k1,
        cal.k2,
        cal.p,
        cal.holdout_containment,
        cal.excluded.len()
    );
    println!("archive written to {}", path.display());
    let mut failures: Vec<String> = Vec::new();
    if !(cal.holdout_containment >= ctx.cfg.size()?.containment) {
        failures.extend(
            cal.holdout
                .iter()
                .filter(|r| r.contained == Some(false))
                .filter_map(|r| r.id.clone()),
        );
    }
    failures.extend(family.energy.iter().filter(|e| !e.sign_ok).map(|e| e.id.clone()));
    Ok(failures)
}

fn size_estimate(ctx: &Ctx, archive: Option<&Path>) -> Result<Vec<String>> {
    let path = archive_path(ctx, archive)?;
    let cal = SizeCalibration::read(&path)?;
    let est = ex::estimate_size(&ctx.cfg, &cal, ctx.h)?;
    write_json(&ctx.path("size_estimate.json"), &est)?;
    println!(
        "W0 = {:.6e}, W = {:.6e}, |D| in [{:.4e}, {:.4e}] ({} mode, p = {:.4})",
        est.w0, est.w, est.lower, est.upper, est.mode, est.p
    );
    Ok(Vec::new())
}

fn report_cmd(paths: &[PathBuf], out: &Path) -> Result<Vec<String>> {
    let ledger = report::read_ledgers(paths)?;
    if ledger.reports.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no reports found ({} corrupt lines in {} files)",
            ledger.corrupt,
            ledger.files.len()
        )));
    }
    let stats = report::aggregate(&ledger.reports);
    write_atomic(&out.join("report.csv"), report::to_csv(&stats).as_bytes())?;
    print!("{}", report::to_table(&stats, ledger.corrupt));
    if ledger.corrupt > 0 {
        eprintln!("skipped {} corrupt lines", ledger.corrupt);
    }
    Ok(Vec::new())
}
