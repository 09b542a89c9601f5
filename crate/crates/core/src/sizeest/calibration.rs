//! Calibration of the size constants on a scenario family and the bounds
//! they give for a new measurement.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{eroded_area, InclusionScenario, JumpType};
use crate::functionals::{check_gap_sign, PowerReport};
use crate::verify::MIN_REPORTS;

/// Grid resolution for the erosion of non-disk shapes.
pub const EROSION_RESOLUTION: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeMode {
    /// Linear upper bound under the fatness condition.
    Fat,
    /// Upper bound with exponent `1/p` under the separation `d1`.
    General,
}

impl std::fmt::Display for SizeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SizeMode::Fat => "fat",
            SizeMode::General => "general",
        })
    }
}

/// One calibration scenario with its measured gap and true inclusion size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub id: String,
    pub scenario: InclusionScenario,
    pub report: PowerReport,
    pub true_size: f64,
    /// Measured `dist(D, ∂Ω₊)`.
    pub plus_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

/// Least-squares fit of `log|D| = c + s log g` over the fit split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    /// `1 / slope` before clamping.
    pub raw_p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeBoundsResult {
    #[serde(rename = "W0")]
    pub w0: f64,
    #[serde(rename = "W")]
    pub w: f64,
    pub gap: f64,
    pub normalized_gap: f64,
    pub lower: f64,
    pub upper: f64,
    pub mode: SizeMode,
    pub p: f64,
    pub k1: f64,
    pub k2: f64,
    pub safety: f64,
    pub id: Option<String>,
    pub true_size: Option<f64>,
    pub contained: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeCalibration {
    pub mode: SizeMode,
    /// Fingerprint of the family the constants belong to.
    pub family: String,
    pub seed: u64,
    pub safety: f64,
    pub k1: f64,
    /// `K2` in fat mode, `K2'` in general mode.
    pub k2: f64,
    pub p: f64,
    pub log_fit: Option<LogFit>,
    pub fit_ids: Vec<String>,
    pub holdout_ids: Vec<String>,
    pub excluded: Vec<Exclusion>,
    pub holdout: Vec<SizeBoundsResult>,
    pub holdout_containment: f64,
    pub notes: Vec<String>,
}

impl SizeCalibration {
    /// Constants given directly, without a family.
    pub fn manual(mode: SizeMode, k1: f64, k2: f64, p: f64, safety: f64) -> Self {
        SizeCalibration {
            mode,
            family: String::new(),
            seed: 0,
            safety,
            k1,
            k2,
            p,
            log_fit: None,
            fit_ids: Vec::new(),
            holdout_ids: Vec::new(),
            excluded: Vec::new(),
            holdout: Vec::new(),
            holdout_containment: f64::NAN,
            notes: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = crate::json::to_line(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                Error::MissingCalibration(format!("no calibration archive at {}", path.display()))
            }
            _ => Error::Io(e),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

/// Bounds on `|D|` from one power report:
/// `[K1 g / s, s K2 g]` (fat) or `[K1 g / s, s K2' g^{1/p}]` (general),
/// with `g = |W₀ - W| / W₀` and `s` the calibration's safety factor.
pub fn bound_size(
    report: &PowerReport,
    calibration: Option<&SizeCalibration>,
    mode: SizeMode,
    jump: JumpType,
) -> Result<SizeBoundsResult> {
    let cal = calibration.ok_or_else(|| Error::MissingCalibration(format!("no {mode} calibration available")))?;
    if cal.mode != mode {
        return Err(Error::MissingCalibration(format!(
            "calibration is for {} mode, {mode} requested",
            cal.mode
        )));
    }
    check_gap_sign(report, jump)?;
    let g = report.normalized_gap;
    let s = cal.safety;
    let upper = match mode {
        SizeMode::Fat => s * cal.k2 * g,
        SizeMode::General => s * cal.k2 * g.powf(1.0 / cal.p),
    };
    Ok(SizeBoundsResult {
        w0: report.w0,
        w: report.w,
        gap: report.gap,
        normalized_gap: g,
        lower: cal.k1 * g / s,
        upper,
        mode,
        p: cal.p,
        k1: cal.k1,
        k2: cal.k2,
        safety: s,
        id: None,
        true_size: None,
        contained: None,
    })
}

fn exclusion_reason(m: &FamilyMember, mode: SizeMode) -> Option<String> {
    if m.report.normalized_gap == 0.0 {
        return Some("zero power gap".into());
    }
    match mode {
        SizeMode::Fat => match m.scenario.h {
            None => Some("fatness parameter h not declared".into()),
            Some(h) => {
                let (eroded, _) = eroded_area(&m.scenario.shape, h, EROSION_RESOLUTION);
                let ratio = eroded / m.scenario.shape.area();
                (ratio < 0.5).then(|| format!("fatness condition fails: |D_h|/|D| = {ratio:.4} < 1/2 at h = {h}"))
            }
        },
        SizeMode::General => match m.scenario.d1 {
            None => Some("separation d1 not declared".into()),
            Some(d1) => (m.plus_distance < d1)
                .then(|| format!("separation fails: dist(D, boundary of plus side) = {} < d1 = {d1}", m.plus_distance)),
        },
    }
}

fn log_fit(points: &[(f64, f64)]) -> Option<LogFit> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(g, d)| (a + g.ln() / n, b + d.ln() / n));
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(a, b), &(g, d)| {
        let dx = g.ln() - mx;
        (a + dx * (d.ln() - my), b + dx * dx)
    });
    if sxx <= 1e-24 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LogFit {
        slope,
        intercept: my - slope * mx,
        raw_p: 1.0 / slope,
    })
}

/// Fits the size constants on a seeded split of `family` and evaluates the
/// bounds on the holdout. Members that violate the mode's hypothesis are
/// excluded first.
pub fn calibrate_size(
    family: &[FamilyMember],
    mode: SizeMode,
    seed: u64,
    fit_fraction: f64,
    safety: f64,
    fingerprint: &str,
) -> Result<SizeCalibration> {
    if family.len() < MIN_REPORTS {
        return Err(Error::TooFewReports {
            got: family.len(),
            need: MIN_REPORTS,
        });
    }
    if !(fit_fraction > 0.0 && fit_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("fit fraction {fit_fraction} must lie in (0, 1)")));
    }
    if !(safety >= 1.0 && safety.is_finite()) {
        return Err(Error::InvalidInput(format!("safety factor {safety} must be at least 1")));
    }
    if family.iter().all(|m| m.report.normalized_gap == 0.0) {
        return Err(Error::DegenerateFamily("every power gap vanishes".into()));
    }
    let mut members: Vec<&FamilyMember> = family.iter().collect();
    members.sort_by(|a, b| a.id.cmp(&b.id));
    if members.windows(2).any(|w| w[0].id == w[1].id) {
        return Err(Error::InvalidInput("duplicate member ids in family".into()));
    }
    let mut excluded = Vec::new();
    members.retain(|m| match exclusion_reason(m, mode) {
        Some(reason) => {
            excluded.push(Exclusion { id: m.id.clone(), reason });
            false
        }
        None => true,
    });
    if members.len() < 2 {
        return Err(Error::DegenerateFamily(format!(
            "{} of {} members remain after exclusions",
            members.len(),
            family.len()
        )));
    }
    let n = members.len();
    let n_fit = ((n as f64 * fit_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fit_idx = order[..n_fit].to_vec();
    let mut hold_idx = order[n_fit..].to_vec();
    fit_idx.sort_unstable();
    hold_idx.sort_unstable();

    let ratios: Vec<f64> = fit_idx
        .iter()
        .map(|&i| members[i].true_size / members[i].report.normalized_gap)
        .collect();
    let k1 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();
    let (k2, p, fit) = match mode {
        SizeMode::Fat => (ratios.iter().copied().fold(0.0, f64::max), 1.0, None),
        SizeMode::General => {
            let pts: Vec<(f64, f64)> = fit_idx
                .iter()
                .map(|&i| (members[i].report.normalized_gap, members[i].true_size))
                .collect();
            let fit = log_fit(&pts);
            let p = match fit {
                Some(f) if f.slope > 0.0 && f.raw_p >= 1.0 => f.raw_p,
                Some(f) => {
                    notes.push(format!("fitted exponent p = {} clamped to 1", f.raw_p));
                    1.0
                }
                None => {
                    notes.push("gaps do not vary over the fit split; p set to 1".into());
                    1.0
                }
            };
            let k2 = pts.iter().map(|&(g, d)| d / g.powf(1.0 / p)).fold(0.0, f64::max);
            (k2, p, fit)
        }
    };
    let mut cal = SizeCalibration {
        mode,
        family: fingerprint.to_string(),
        seed,
        safety,
        k1,
        k2,
        p,
        log_fit: fit,
        fit_ids: fit_idx.iter().map(|&i| members[i].id.clone()).collect(),
        holdout_ids: hold_idx.iter().map(|&i| members[i].id.clone()).collect(),
        excluded,
        holdout: Vec::new(),
        holdout_containment: 0.0,
        notes,
    };
    let mut holdout = Vec::with_capacity(hold_idx.len());
    for &i in &hold_idx {
        let m = members[i];
        let mut b = bound_size(&m.report, Some(&cal), mode, m.scenario.jump)?;
        b.id = Some(m.id.clone());
        b.true_size = Some(m.true_size);
        b.contained = Some(b.lower <= m.true_size && m.true_size <= b.upper);
        holdout.push(b);
    }
    let contained = holdout.iter().filter(|b| b.contained == Some(true)).count();
    cal.holdout_containment = contained as f64 / holdout.len() as f64;
    cal.holdout = holdout;
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{InclusionCoefficient, Shape};

    fn report(g: f64) -> PowerReport {
        PowerReport {
            w0: 1.0,
            w: 1.0 + g,
            gap: -g,
            normalized_gap: g,
            inclusion_energy: g,
            w0_discrepancy: 0.0,
            w_discrepancy: 0.0,
        }
    }

    fn disk_member(id: usize, r: f64, g: f64) -> FamilyMember {
        let scenario = InclusionScenario {
            shape: Shape::Disk {
                center: [0.5, 0.5],
                radius: r,
            },
            a_hat: InclusionCoefficient::Scaled { factor: 2.0 },
            eta: 0.5,
            zeta: 2.0,
            jump: JumpType::Raise,
            d1: Some(0.05),
            h: Some(0.25 * r),
        };
        FamilyMember {
            id: format!("m{id:02}"),
            true_size: scenario.shape.area(),
            scenario,
            report: report(g),
            plus_distance: 0.5 - r,
        }
    }

    #[test]
    fn arithmetic_contract() {
        let cal = SizeCalibration::manual(SizeMode::Fat, 1.0, 3.0, 1.0, 1.0);
        let b = bound_size(&report(1.0 / 3.0), Some(&cal), SizeMode::Fat, JumpType::Raise).unwrap();
        assert!((b.lower - 1.0 / 3.0).abs() < 1e-15 && (b.upper - 1.0).abs() < 1e-15);
        let z = bound_size(&report(0.0), Some(&cal), SizeMode::Fat, JumpType::Raise).unwrap();
        assert_eq!((z.lower, z.upper), (0.0, 0.0));
    }

    #[test]
    fn missing_calibration_and_sign_mismatch() {
        assert!(matches!(
            bound_size(&report(0.1), None, SizeMode::Fat, JumpType::Raise),
            Err(Error::MissingCalibration(_))
        ));
        let cal = SizeCalibration::manual(SizeMode::Fat, 1.0, 3.0, 1.0, 1.0);
        assert!(matches!(
            bound_size(&report(0.1), Some(&cal), SizeMode::General, JumpType::Raise),
            Err(Error::MissingCalibration(_))
        ));
        // W > W0 contradicts a lowered inclusion
        assert!(matches!(
            bound_size(&report(0.1), Some(&cal), SizeMode::Fat, JumpType::Lower),
            Err(Error::GapSignInconsistent { .. })
        ));
    }

    #[test]
    fn identical_scenarios_give_equal_constants() {
        let family: Vec<_> = (0..12).map(|i| disk_member(i, 0.1, 0.05)).collect();
        let cal = calibrate_size(&family, SizeMode::Fat, 1, 0.5, 1.0, "f").unwrap();
        assert_eq!(cal.k1, cal.k2);
        assert_eq!(cal.holdout_containment, 1.0);
    }

    #[test]
    fn proportional_family_fits_unit_exponent() {
        // |D| = 0.7 g exactly, so the log-log slope is 1
        let family: Vec<_> = (0..16)
            .map(|i| {
                let r = 0.05 + 0.01 * i as f64;
                let area = std::f64::consts::PI * r * r;
                disk_member(i, r, area / 0.7)
            })
            .collect();
        let cal = calibrate_size(&family, SizeMode::General, 4, 0.5, 1.0, "f").unwrap();
        assert!((cal.p - 1.0).abs() < 0.2);
        assert!((cal.k1 - 0.7).abs() < 1e-12);
        assert_eq!(cal.holdout_containment, 1.0);
    }

    #[test]
    fn thin_spine_is_excluded_in_fat_mode() {
        let mut family: Vec<_> = (0..11).map(|i| disk_member(i, 0.1, 0.05 + 0.001 * i as f64)).collect();
        family[3].scenario.shape = Shape::Polygon {
            vertices: vec![[0.2, 0.5], [0.8, 0.5], [0.8, 0.52], [0.2, 0.52]],
        };
        family[3].scenario.h = Some(0.02);
        let cal = calibrate_size(&family, SizeMode::Fat, 2, 0.5, 1.0, "f").unwrap();
        assert_eq!(cal.excluded.len(), 1);
        assert_eq!(cal.excluded[0].id, "m03");
        assert!(cal.excluded[0].reason.contains("fatness"));
        assert!(!cal.fit_ids.contains(&"m03".to_string()));
    }

    #[test]
    fn degenerate_and_small_families() {
        let family: Vec<_> = (0..10).map(|i| disk_member(i, 0.1, 0.0)).collect();
        assert!(matches!(
            calibrate_size(&family, SizeMode::Fat, 1, 0.5, 1.0, "f"),
            Err(Error::DegenerateFamily(_))
        ));
        assert!(matches!(
            calibrate_size(&family[..5], SizeMode::Fat, 1, 0.5, 1.0, "f"),
            Err(Error::TooFewReports { .. })
        ));
    }

    #[test]
    fn archive_round_trip() {
        let family: Vec<_> = (0..10).map(|i| disk_member(i, 0.05 + 0.01 * i as f64, 0.01 + 0.01 * i as f64)).collect();
        let cal = calibrate_size(&family, SizeMode::Fat, 9, 0.5, 2.0, "abc").unwrap();
        let dir = std::env::temp_dir().join(format!("jumplab-archive-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cal.json");
        cal.write(&path).unwrap();
        assert_eq!(SizeCalibration::read(&path).unwrap(), cal);
        assert!(matches!(
            SizeCalibration::read(&dir.join("absent.json")),
            Err(Error::MissingCalibration(_))
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
