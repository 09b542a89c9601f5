//! Powers `W₀`, `W` and the energy inequality ratio.

use serde::{Deserialize, Serialize};

use super::region::energy;
use crate::error::{Error, Result};
use crate::fields::JumpType;
use crate::mat::{dist, dot};
use crate::solver::{DiscreteSolution, Medium, Tag};

/// Volume and boundary forms of the power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerValue {
    /// `∫_Ω A∇u·∇u`; this is the reported power.
    pub volume: f64,
    /// `∫_{∂Ω} φ A∇u·ν` over the Dirichlet sides, with the elementwise flux.
    pub boundary: f64,
    /// `|volume - boundary| / volume`
    pub discrepancy: f64,
}

/// Power of `sol`, which must have been computed for `medium`.
pub fn power(sol: &DiscreteSolution, medium: &Medium) -> Result<PowerValue> {
    sol.check_medium(medium)?;
    let volume = energy(sol, None);
    let mesh = &sol.mesh;
    let terms: Vec<f64> = mesh
        .boundary_edges()
        .into_iter()
        .filter(|(_, _, _, side)| mesh.domain.is_dirichlet(*side))
        .map(|(a, b, t, side)| {
            let len = dist(mesh.vertices[a], mesh.vertices[b]);
            let phi_mean = 0.5 * (sol.values[a] + sol.values[b]);
            let flux = dot(sol.coefficients[t].mul_vec(sol.gradients[t]), side.outward_normal());
            len * phi_mean * flux
        })
        .collect();
    let boundary: f64 = terms.iter().sum();
    let discrepancy = if volume > 0.0 {
        (volume - boundary).abs() / volume
    } else {
        (volume - boundary).abs()
    };
    Ok(PowerValue {
        volume,
        boundary,
        discrepancy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub w0: f64,
    pub w: f64,
    /// `W₀ - W`
    pub gap: f64,
    /// `|W₀ - W| / W₀`
    pub normalized_gap: f64,
    /// `∫_D |∇u|²` for the background solution `u`.
    pub inclusion_energy: f64,
    pub w0_discrepancy: f64,
    pub w_discrepancy: f64,
}

/// Builds the power report from the background solution `u` and the
/// perturbed solution `v`, both on the same inclusion-fitted mesh.
pub fn power_report(
    u: &DiscreteSolution,
    background: &Medium,
    v: &DiscreteSolution,
    perturbed: &Medium,
) -> Result<PowerReport> {
    let p0 = power(u, background)?;
    let p = power(v, perturbed)?;
    if p0.volume <= 0.0 {
        return Err(Error::ConstantSolution);
    }
    let mesh = &u.mesh;
    let parts: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| {
            if mesh.tags[t] == Tag::Inclusion {
                let g = u.gradients[t];
                mesh.area(t) * (g[0] * g[0] + g[1] * g[1])
            } else {
                0.0
            }
        })
        .collect();
    let gap = p0.volume - p.volume;
    let report = PowerReport {
        w0: p0.volume,
        w: p.volume,
        gap,
        normalized_gap: gap.abs() / p0.volume,
        inclusion_energy: parts.iter().sum(),
        w0_discrepancy: p0.discrepancy,
        w_discrepancy: p.discrepancy,
    };
    if let Some(s) = &perturbed.inclusion {
        check_gap_sign(&report, s.jump)?;
    }
    Ok(report)
}

/// A raised inclusion can only raise the power and a lowered one only
/// lower it, up to rounding.
pub fn check_gap_sign(report: &PowerReport, jump: JumpType) -> Result<()> {
    let tol = 1e-10 * report.w0;
    let diff = report.w - report.w0;
    let ok = match jump {
        JumpType::Raise => diff >= -tol,
        JumpType::Lower => diff <= tol,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::GapSignInconsistent {
            sign: diff.signum(),
            jump: jump.to_string(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyLemmaRecord {
    /// `|W₀ - W| / ∫_D |∇u|²`
    pub rho: f64,
    pub gap: f64,
    pub inclusion_energy: f64,
    pub eta: f64,
    pub zeta: f64,
}

pub fn energy_lemma_check(report: &PowerReport, eta: f64, zeta: f64) -> Result<EnergyLemmaRecord> {
    let e = report.inclusion_energy;
    let rho = if e > 0.0 {
        report.gap.abs() / e
    } else if report.gap == 0.0 {
        0.0
    } else {
        return Err(Error::QuadratureInconsistency(report.gap));
    };
    Ok(EnergyLemmaRecord {
        rho,
        gap: report.gap,
        inclusion_energy: e,
        eta,
        zeta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyLemmaSummary {
    pub count: usize,
    pub min_rho: f64,
    pub max_rho: f64,
    /// `max ρ / min ρ`
    pub spread: f64,
    pub all_finite_positive: bool,
}

pub fn summarize_energy_lemma(records: &[EnergyLemmaRecord]) -> Result<EnergyLemmaSummary> {
    if records.is_empty() {
        return Err(Error::TooFewReports { got: 0, need: 1 });
    }
    let min_rho = records.iter().map(|r| r.rho).fold(f64::INFINITY, f64::min);
    let max_rho = records.iter().map(|r| r.rho).fold(0.0, f64::max);
    Ok(EnergyLemmaSummary {
        count: records.len(),
        min_rho,
        max_rho,
        spread: max_rho / min_rho,
        all_finite_positive: records.iter().all(|r| r.rho.is_finite() && r.rho > 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{InclusionCoefficient, InclusionScenario, PiecewiseCoefficient, Rect, Shape};
    use crate::solver::{build_mesh, Domain, Problem, RectSide};
    use std::sync::Arc;

    fn strip(factor: f64, jump: JumpType) -> InclusionScenario {
        InclusionScenario {
            shape: Shape::Polygon {
                vertices: vec![[0.0, 0.25], [1.0, 0.25], [1.0, 0.75], [0.0, 0.75]],
            },
            a_hat: InclusionCoefficient::Scaled { factor },
            eta: 0.5,
            zeta: 2.0,
            jump,
            d1: None,
            h: None,
        }
    }

    fn series(h: f64, factor: f64, jump: JumpType) -> PowerReport {
        let s = strip(factor, jump);
        let d = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let mesh = Arc::new(build_mesh(&d, None, Some(&s), h).unwrap());
        let bg = Medium::new(PiecewiseCoefficient::isotropic(1.0, 1.0));
        let inc = bg.clone().with_inclusion(s);
        let phi = |p: crate::mat::Vec2| p[1];
        let u = Problem::new(mesh.clone(), &bg).solve(&phi).unwrap();
        let v = Problem::new(mesh, &inc).solve(&phi).unwrap();
        power_report(&u, &bg, &v, &inc).unwrap()
    }

    #[test]
    fn series_strip_powers() {
        let r = series(1.0 / 32.0, 2.0, JumpType::Raise);
        assert!((r.w0 - 1.0).abs() < 1e-10);
        assert!((r.w - 4.0 / 3.0).abs() < 1e-10);
        assert!((r.gap + 1.0 / 3.0).abs() < 1e-10);
        assert!((r.inclusion_energy - 0.5).abs() < 1e-10);
        let e = energy_lemma_check(&r, 0.5, 2.0).unwrap();
        assert!((e.rho - 2.0 / 3.0).abs() < 1e-10);
        // lowered strip: 1 / (0.5 + 0.5 / 0.5) = 2/3
        let r = series(1.0 / 32.0, 0.5, JumpType::Lower);
        assert!((r.w - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn wrong_jump_type_is_rejected() {
        let s = strip(2.0, JumpType::Lower);
        let d = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let mesh = Arc::new(build_mesh(&d, None, Some(&s), 0.125).unwrap());
        let bg = Medium::new(PiecewiseCoefficient::isotropic(1.0, 1.0));
        let inc = bg.clone().with_inclusion(s);
        let u = Problem::new(mesh.clone(), &bg).solve(&|p| p[1]).unwrap();
        let v = Problem::new(mesh, &inc).solve(&|p| p[1]).unwrap();
        assert!(matches!(
            power_report(&u, &bg, &v, &inc),
            Err(Error::GapSignInconsistent { .. })
        ));
        assert!(matches!(power(&v, &bg), Err(Error::CoefficientMismatch)));
    }

    #[test]
    fn trivial_power_and_green_identity() {
        let mesh = Arc::new(build_mesh(&Domain::dirichlet(Rect::unit()), None, None, 0.1).unwrap());
        let m = Medium::new(PiecewiseCoefficient::isotropic(1.0, 1.0));
        let u = Problem::new(mesh, &m).solve(&|p| p[0]).unwrap();
        let p = power(&u, &m).unwrap();
        assert!((p.volume - 1.0).abs() < 1e-12);
        assert!(p.discrepancy <= 1e-8);
    }

    #[test]
    fn no_contrast_gives_zero_ratio() {
        let r = series(0.125, 1.0, JumpType::Raise);
        assert!(r.gap.abs() < 1e-12);
        let mut r0 = r;
        r0.gap = 0.0;
        assert_eq!(energy_lemma_check(&r0, 0.5, 2.0).unwrap().rho, 0.0);
        r0.inclusion_energy = 0.0;
        r0.gap = 1e-3;
        assert!(matches!(energy_lemma_check(&r0, 0.5, 2.0), Err(Error::QuadratureInconsistency(_))));
    }
}
