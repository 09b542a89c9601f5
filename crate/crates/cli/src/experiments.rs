//! Experiment pipelines shared by the subcommands and the acceptance suite.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with the run seed.
//! Member parameters are drawn sequentially before any solve, so the
//! ensemble does not depend on thread scheduling; solves run in parallel
//! and are collected in member order.

use std::sync::Arc;

use jumplab::fields::{
    distance_to_plus_boundary, InclusionCoefficient, InclusionContext, InclusionScenario, JumpType,
    PiecewiseCoefficient, Shape,
};
use jumplab::functionals::{energy_lemma_check, EnergyLemmaRecord, Integrand, PowerReport};
use jumplab::geometry::{make_regions, pull_back_regions, InterfaceGraph, PhysicalRegions};
use jumplab::mat::Vec2;
use jumplab::sizeest::{bound_size, calibrate_size, measure_gap, FamilyMember, SizeBoundsResult, SizeCalibration};
use jumplab::solver::{build_mesh, DiscreteSolution, Medium, Mesh, Problem, SolverOptions};
use jumplab::verify::{
    calibrate, carleman_ratio, center_grid, check_support, propagation_constant, standard_pairs,
    three_region_check, three_sphere_check, CalibrationSet, CarlemanCurve, PropagationResult, Provenance,
    VerificationReport,
};
use jumplab::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{BoundaryData, Config, EnsembleConfig, Mode, SizeConfig};

/// Safety factor used when neither the config nor the command line sets one.
pub const DEFAULT_SAFETY: f64 = 2.0;

pub fn solver_options(cfg: &Config) -> SolverOptions {
    let mut o = SolverOptions::default();
    if let Some(t) = cfg.solver.tolerance {
        o.tolerance = t;
    }
    if let Some(m) = cfg.solver.max_iterations {
        o.max_iterations = m;
    }
    o
}

pub fn medium(cfg: &Config) -> Medium {
    let mut m = Medium::new(cfg.coefficient.clone());
    if let Some(s) = &cfg.inclusion {
        m = m.with_inclusion(s.clone());
    }
    if let Some(l) = &cfg.lower_order {
        m = m.with_lower_order(l.clone());
    }
    m
}

pub fn mesh(cfg: &Config, h: f64, inclusion: Option<&InclusionScenario>) -> Result<Arc<Mesh>> {
    Ok(Arc::new(build_mesh(&cfg.domain, cfg.interface.as_ref(), inclusion, h)?))
}

/// Solves the configured scenario with its boundary data.
pub fn solve_scenario(cfg: &Config, h: f64) -> Result<DiscreteSolution> {
    let data = cfg.boundary()?.clone();
    let m = medium(cfg);
    let mesh = mesh(cfg, h, cfg.inclusion.as_ref())?;
    Problem::new(mesh, &m)
        .with_options(solver_options(cfg))
        .solve(&|p| data.eval(p))
}

/// Largest nodal deviation from a reference function.
pub fn max_nodal_error(sol: &DiscreteSolution, reference: &dyn Fn(Vec2) -> f64) -> f64 {
    sol.mesh
        .vertices
        .iter()
        .zip(&sol.values)
        .map(|(&p, &u)| (u - reference(p)).abs())
        .fold(0.0, f64::max)
}

/// One random member of a layered ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub id: String,
    /// `A₊ / A₋`
    pub jump_ratio: f64,
    pub data: BoundaryData,
}

impl Member {
    /// The configured coefficient with its plus side scaled by the jump.
    pub fn coefficient(&self, base: &PiecewiseCoefficient) -> PiecewiseCoefficient {
        PiecewiseCoefficient {
            plus: base.plus.scaled(self.jump_ratio),
            minus: base.minus.clone(),
            lambda0: base.lambda0 * self.jump_ratio.min(1.0),
            m0: base.m0 * self.jump_ratio.max(1.0),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Draws `size` members: jump ratio log-uniform in the configured range,
/// data `c0 + c·p + Σ a cos(k·p + θ)` with `c0, c ∈ [-1, 1]`,
/// `a ∈ [0, 1/2]`, `|k|` in the configured wavenumber range.
pub fn draw_members(ens: &EnsembleConfig, seed: u64) -> Vec<Member> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = std::f64::consts::TAU;
    (0..ens.size)
        .map(|i| {
            let jump_ratio = uniform(&mut rng, ens.jump_ratio[0].ln(), ens.jump_ratio[1].ln()).exp();
            let c0 = uniform(&mut rng, -1.0, 1.0);
            let c = [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
            let modes = (0..ens.modes)
                .map(|_| {
                    let amplitude = uniform(&mut rng, 0.0, 0.5);
                    let angle = uniform(&mut rng, 0.0, tau);
                    let k = uniform(&mut rng, ens.wavenumber[0], ens.wavenumber[1]);
                    let phase = uniform(&mut rng, 0.0, tau);
                    Mode {
                        amplitude,
                        k: [k * angle.cos(), k * angle.sin()],
                        phase,
                    }
                })
                .collect();
            Member {
                id: format!("member-{i:03}"),
                jump_ratio,
                data: BoundaryData::Trig { c0, c, modes },
            }
        })
        .collect()
}

/// Solves every member on one shared mesh, in parallel, in member order.
pub fn solve_members(cfg: &Config, members: &[Member], mesh: &Arc<Mesh>) -> Result<Vec<DiscreteSolution>> {
    let opts = solver_options(cfg);
    members
        .par_iter()
        .map(|m| {
            let mut medium = Medium::new(m.coefficient(&cfg.coefficient));
            if let Some(l) = &cfg.lower_order {
                medium = medium.with_lower_order(l.clone());
            }
            Problem::new(mesh.clone(), &medium)
                .with_options(opts.clone())
                .solve(&|p| m.data.eval(p))
        })
        .collect()
}

/// The pulled-back regions for the configured weight and radii fractions.
pub fn regions(cfg: &Config) -> Result<PhysicalRegions> {
    let params = cfg.weight()?.build()?;
    let rt = make_regions(
        &params,
        cfg.regions.r1_fraction * params.big_r,
        cfg.regions.r2_fraction * params.big_r,
    )?;
    let interface = cfg
        .interface
        .clone()
        .ok_or_else(|| Error::InvalidInput("the three-region check needs an [interface]".into()))?;
    pull_back_regions(&interface, &rt)
}

pub fn region_form(cfg: &Config) -> Integrand {
    match cfg.regions.form.as_str() {
        "value" => Integrand::Value,
        _ => Integrand::Gradient,
    }
}

fn provenance(h: f64, seed: u64, m: &Member) -> Provenance {
    Provenance::new(h).with_seed(seed).param("jump_ratio", m.jump_ratio)
}

/// Solutions and raw reports of one ensemble run.
pub struct EnsembleRun {
    pub members: Vec<Member>,
    pub solutions: Vec<DiscreteSolution>,
    pub reports: Vec<VerificationReport>,
}

pub fn three_region_ensemble(cfg: &Config, seed: u64, h: f64) -> Result<EnsembleRun> {
    let regions = regions(cfg)?;
    let form = region_form(cfg);
    let members = draw_members(&cfg.ensemble, seed);
    let mesh = mesh(cfg, h, None)?;
    let solutions = solve_members(cfg, &members, &mesh)?;
    let reports = members
        .par_iter()
        .zip(solutions.par_iter())
        .map(|(m, sol)| three_region_check(&m.id, sol, &regions, form, provenance(h, seed, m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleRun {
        members,
        solutions,
        reports,
    })
}

pub fn three_sphere_ensemble(cfg: &Config, seed: u64, h: f64) -> Result<EnsembleRun> {
    let sphere = cfg
        .sphere
        .clone()
        .ok_or_else(|| Error::InvalidInput("config has no [sphere] section".into()))?;
    let members = draw_members(&cfg.ensemble, seed);
    let mesh = mesh(cfg, h, None)?;
    let solutions = solve_members(cfg, &members, &mesh)?;
    let reports = members
        .par_iter()
        .zip(solutions.par_iter())
        .map(|(m, sol)| {
            three_sphere_check(&m.id, sol, sphere.center, sphere.radii, sphere.theta, provenance(h, seed, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleRun {
        members,
        solutions,
        reports,
    })
}

/// Calibrates on the fit split and judges the holdout.
pub fn calibrate_reports(cfg: &Config, reports: Vec<VerificationReport>, seed: u64, safety: f64) -> Result<CalibrationSet> {
    calibrate(reports, seed, safety, cfg.ensemble.fit_fraction)
}

/// Propagation constant of one member at one mesh size.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationRecord {
    pub id: String,
    pub jump_ratio: f64,
    pub mesh_h: f64,
    pub result: PropagationResult,
    /// Constant at `h/2`, when the refinement check ran.
    pub refined_constant: Option<f64>,
    /// `|C(h/2) - C(h)| / C(h/2)`
    pub relative_change: Option<f64>,
    pub pass: bool,
}

/// Propagation of smallness over the layered ensemble, optionally checked
/// for stability under `h → h/2`.
pub fn propagation_ensemble(cfg: &Config, seed: u64, h: f64) -> Result<Vec<PropagationRecord>> {
    let pc = &cfg.propagation;
    let members = draw_members(&cfg.ensemble, seed);
    let centers = center_grid(cfg.domain.rect, pc.rho, pc.spacing);
    let run = |h: f64| -> Result<Vec<PropagationResult>> {
        let mesh = mesh(cfg, h, None)?;
        let sols = solve_members(cfg, &members, &mesh)?;
        sols.iter().map(|s| propagation_constant(s, pc.rho, &centers)).collect()
    };
    let coarse = run(h)?;
    let fine = if pc.refine_check { Some(run(h / 2.0)?) } else { None };
    Ok(members
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let result = coarse[i].clone();
            let refined = fine.as_ref().map(|f| f[i].constant);
            let change = refined.map(|c| (c - result.constant).abs() / c);
            let pass = result.constant > 0.0 && change.map_or(true, |c| c <= pc.tolerance);
            PropagationRecord {
                id: m.id.clone(),
                jump_ratio: m.jump_ratio,
                mesh_h: h,
                result,
                refined_constant: refined,
                relative_change: change,
                pass,
            }
        })
        .collect())
}

/// Both quadrature levels of one Carleman test pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarlemanRecord {
    pub pair: String,
    pub coarse: CarlemanCurve,
    pub fine: CarlemanCurve,
    /// `|max_fine - max_coarse| / max_fine`
    pub relative_change: f64,
    pub finite: bool,
    pub pass: bool,
}

pub fn carleman_pairs(cfg: &Config) -> Result<Vec<CarlemanRecord>> {
    let params = cfg.weight()?.build()?;
    let cc = &cfg.carleman;
    let pairs = if cc.pairs.is_empty() {
        standard_pairs(&params)
    } else {
        cc.pairs.clone()
    };
    let taus: Vec<f64> = cc.tau_multiples.iter().map(|m| m * params.tau0).collect();
    pairs
        .par_iter()
        .map(|pair| {
            check_support(pair, &params)?;
            let lower = cfg.lower_order.as_ref();
            let coarse = carleman_ratio(pair, &cfg.coefficient, lower, &params, &taus, cc.resolution)?;
            let fine = carleman_ratio(pair, &cfg.coefficient, lower, &params, &taus, 2 * cc.resolution)?;
            let finite = coarse.points.iter().chain(&fine.points).all(|p| p.ratio.is_finite());
            let relative_change = (fine.max_ratio - coarse.max_ratio).abs() / fine.max_ratio;
            Ok(CarlemanRecord {
                pair: pair.name.clone(),
                pass: finite && relative_change <= cc.tolerance,
                coarse,
                fine,
                relative_change,
                finite,
            })
        })
        .collect()
}

/// Everything that defines a size family: the constants calibrated on it
/// only transfer to measurements with the same fingerprint.
#[derive(Serialize)]
struct FamilyKey<'a> {
    domain: &'a jumplab::solver::Domain,
    interface: &'a Option<InterfaceGraph>,
    coefficient: &'a PiecewiseCoefficient,
    lower_order: &'a Option<jumplab::fields::LowerOrderTerms>,
    boundary: &'a BoundaryData,
    mode: jumplab::sizeest::SizeMode,
    contrast: f64,
    eta: f64,
    zeta: f64,
    d1: f64,
    fat_h: f64,
}

pub fn family_fingerprint(cfg: &Config) -> Result<String> {
    let s = cfg.size()?;
    jumplab::json::fingerprint(&FamilyKey {
        domain: &cfg.domain,
        interface: &cfg.interface,
        coefficient: &cfg.coefficient,
        lower_order: &cfg.lower_order,
        boundary: cfg.boundary()?,
        mode: s.mode,
        contrast: s.contrast,
        eta: s.eta,
        zeta: s.zeta,
        d1: s.d1,
        fat_h: s.fat_h,
    })
}

fn jump_of(contrast: f64) -> JumpType {
    if contrast >= 1.0 {
        JumpType::Raise
    } else {
        JumpType::Lower
    }
}

/// Disk scenarios with radii uniform in the configured range, placed by
/// rejection so that each disk keeps `d1` from `∂Ω₊`.
pub fn draw_disks(cfg: &Config, seed: u64) -> Result<Vec<InclusionScenario>> {
    let s = cfg.size()?;
    let rect = cfg.domain.rect;
    let ctx = InclusionContext {
        domain: rect,
        interface: cfg.interface.as_ref(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(s.members);
    for i in 0..s.members {
        let r = uniform(&mut rng, s.radii[0], s.radii[1]);
        let margin = r + s.d1;
        let mut placed = None;
        for _ in 0..10_000 {
            let c = [
                uniform(&mut rng, rect.x0 + margin, rect.x1 - margin),
                uniform(&mut rng, rect.y0 + margin, rect.y1 - margin),
            ];
            let shape = Shape::Disk { center: c, radius: r };
            if distance_to_plus_boundary(&shape, &ctx) >= s.d1 {
                placed = Some(shape);
                break;
            }
        }
        let shape = placed.ok_or_else(|| {
            Error::InvalidInput(format!("could not place disk {i} of radius {r} at distance {} inside the plus side", s.d1))
        })?;
        out.push(InclusionScenario {
            shape,
            a_hat: InclusionCoefficient::Scaled { factor: s.contrast },
            eta: s.eta,
            zeta: s.zeta,
            jump: jump_of(s.contrast),
            d1: Some(s.d1),
            h: Some(s.fat_h),
        });
    }
    Ok(out)
}

/// The same scenario with the reciprocal contrast, for the opposite jump.
pub fn twin(s: &InclusionScenario, size: &SizeConfig) -> InclusionScenario {
    let f = 1.0 / size.contrast;
    let (eta, zeta) = if f < 1.0 { (1.0 - f, f) } else { (f - 1.0, f) };
    InclusionScenario {
        a_hat: InclusionCoefficient::Scaled { factor: f },
        eta,
        zeta,
        jump: jump_of(f),
        ..s.clone()
    }
}

/// Gap measurement of one scenario, with the background solution's
/// inclusion energy for the energy lemma.
pub fn measure(cfg: &Config, scenario: &InclusionScenario, h: f64) -> Result<PowerReport> {
    let data = cfg.boundary()?.clone();
    let mesh = mesh(cfg, h, Some(scenario))?;
    Ok(measure_gap(mesh, &cfg.coefficient, scenario, &|p| data.eval(p))?.report)
}

/// Energy-lemma record of one family member.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyRow {
    pub id: String,
    pub jump: JumpType,
    pub record: EnergyLemmaRecord,
    /// `W - W₀` has the sign the jump type demands.
    pub sign_ok: bool,
}

pub struct SizeFamily {
    pub members: Vec<FamilyMember>,
    pub energy: Vec<EnergyRow>,
}

/// Solves the disk family (and, when `twins` is set, the reciprocal
/// contrast of every disk) at mesh size `h`.
pub fn size_family(cfg: &Config, seed: u64, h: f64, twins: bool) -> Result<SizeFamily> {
    let s = cfg.size()?;
    let disks = draw_disks(cfg, seed)?;
    let ctx = InclusionContext {
        domain: cfg.domain.rect,
        interface: cfg.interface.as_ref(),
    };
    let rows: Vec<(FamilyMember, Vec<EnergyRow>)> = disks
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let id = format!("disk-{i:03}");
            let report = measure(cfg, d, h)?;
            let mut energy = vec![energy_row(&id, d, &report)?];
            if twins {
                let t = twin(d, s);
                let tr = measure(cfg, &t, h)?;
                energy.push(energy_row(&format!("{id}-twin"), &t, &tr)?);
            }
            let member = FamilyMember {
                id,
                true_size: d.shape.area(),
                plus_distance: distance_to_plus_boundary(&d.shape, &ctx),
                scenario: d.clone(),
                report,
            };
            Ok((member, energy))
        })
        .collect::<Result<_>>()?;
    let mut members = Vec::new();
    let mut energy = Vec::new();
    for (m, e) in rows {
        members.push(m);
        energy.extend(e);
    }
    Ok(SizeFamily { members, energy })
}

fn energy_row(id: &str, s: &InclusionScenario, r: &PowerReport) -> Result<EnergyRow> {
    Ok(EnergyRow {
        id: id.to_string(),
        jump: s.jump,
        record: energy_lemma_check(r, s.eta, s.zeta)?,
        sign_ok: jumplab::functionals::check_gap_sign(r, s.jump).is_ok(),
    })
}

pub fn calibrate_family(cfg: &Config, family: &SizeFamily, seed: u64, safety: f64) -> Result<SizeCalibration> {
    let s = cfg.size()?;
    calibrate_size(&family.members, s.mode, seed, s.fit_fraction, safety, &family_fingerprint(cfg)?)
}

/// Bounds for the configured inclusion from a calibration archive whose
/// family fingerprint matches the config.
pub fn estimate_size(cfg: &Config, cal: &SizeCalibration, h: f64) -> Result<SizeBoundsResult> {
    let s = cfg.size()?;
    let fp = family_fingerprint(cfg)?;
    if cal.family != fp {
        return Err(Error::MissingCalibration(format!(
            "archive was calibrated for family {} but the config describes family {fp}",
            cal.family
        )));
    }
    let scenario = cfg
        .inclusion
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("size-estimate needs an [inclusion]".into()))?;
    let report = measure(cfg, scenario, h)?;
    let mut out = bound_size(&report, Some(cal), s.mode, scenario.jump)?;
    let area = scenario.shape.area();
    out.true_size = Some(area);
    out.contained = Some(out.lower <= area && area <= out.upper);
    Ok(out)
}

