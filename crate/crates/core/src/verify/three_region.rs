//! Three-region interpolation across the interface.

use super::report::{Provenance, VerificationReport};
use crate::error::{Error, Result};
use crate::functionals::{region_integrals, Integrand};
use crate::geometry::PhysicalRegions;
use crate::solver::DiscreteSolution;

pub fn inequality_name(form: Integrand) -> &'static str {
    match form {
        Integrand::Value => "three_region_value",
        Integrand::Gradient => "three_region_gradient",
    }
}

/// Integrates the chosen integrand over `Ũ₁, Ũ₂, Ũ₃` and reports
/// `∫_{Ũ₂} / ((∫_{Ũ₁})^κ₁ (∫_{Ũ₃})^κ₂)`.
pub fn three_region_check(
    experiment: &str,
    sol: &DiscreteSolution,
    regions: &PhysicalRegions,
    form: Integrand,
    provenance: Provenance,
) -> Result<VerificationReport> {
    let rect = sol.mesh.domain.rect;
    for p in regions.u3_hull_samples(64)? {
        if !rect.contains(p) {
            return Err(Error::RegionOutsideDomain(format!(
                "U3 reaches ({}, {}) outside the mesh rectangle",
                p[0], p[1]
            )));
        }
    }
    let m = region_integrals(sol, regions, form);
    let rt = &regions.regions;
    let mut provenance = provenance
        .param("R1", rt.r1)
        .param("R2", rt.r2)
        .param("a", rt.a);
    provenance.notes.extend(rt.warnings.iter().cloned());
    Ok(VerificationReport::new(
        experiment,
        inequality_name(form),
        m.m2,
        m.m1,
        m.m3,
        rt.kappa1,
        rt.kappa2,
        provenance,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PiecewiseCoefficient, Rect};
    use crate::geometry::{make_regions, pull_back_regions, InterfaceGraph, WeightConfig};
    use crate::mat::Vec2;
    use crate::solver::{build_mesh, solve_dirichlet, Domain};
    use std::sync::Arc;

    fn setup(rect: Rect, phi: &(dyn Fn(Vec2) -> f64 + Sync)) -> (DiscreteSolution, PhysicalRegions) {
        let mut cfg = WeightConfig::new(4.2, 1.0, 0.1, 10.0);
        cfg.delta0 = 10.0;
        let p = cfg.build().unwrap();
        let rt = make_regions(&p, p.big_r, p.big_r / 8.0).unwrap();
        let g = InterfaceGraph::flat([0.0, 0.0], 1.25);
        let regions = pull_back_regions(&g, &rt).unwrap();
        let mesh = build_mesh(&Domain::dirichlet(rect), Some(&g), None, 1.0 / 32.0).unwrap();
        let sol = solve_dirichlet(&PiecewiseCoefficient::isotropic(2.0, 1.0), None, None, Arc::new(mesh), phi).unwrap();
        (sol, regions)
    }

    #[test]
    fn zero_solution_passes_with_zero_ratio() {
        let (sol, regions) = setup(Rect::new(-1.25, 1.25, -0.5, 0.5), &|_| 0.0);
        let mut r = three_region_check("z", &sol, &regions, Integrand::Gradient, Provenance::new(1.0 / 32.0)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.ratio, 0.0);
        r.judge(0.0, 2.0);
        assert_eq!(r.pass, Some(true));
    }

    #[test]
    fn doubling_the_solution_keeps_the_ratio() {
        let phi = |p: Vec2| (2.0 * p[0]).sin() + p[1];
        let (sol, regions) = setup(Rect::new(-1.25, 1.25, -0.5, 0.5), &phi);
        let twice = sol.scaled(2.0);
        for form in [Integrand::Value, Integrand::Gradient] {
            let a = three_region_check("a", &sol, &regions, form, Provenance::new(0.1)).unwrap();
            let b = three_region_check("b", &twice, &regions, form, Provenance::new(0.1)).unwrap();
            assert!(a.ratio > 0.0 && a.ratio.is_finite());
            assert!(((a.ratio - b.ratio) / a.ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn regions_leaving_the_mesh_are_rejected() {
        let (sol, regions) = setup(Rect::new(-0.5, 0.5, -0.5, 0.5), &|p| p[0]);
        let err = three_region_check("x", &sol, &regions, Integrand::Value, Provenance::new(0.1)).unwrap_err();
        assert!(matches!(err, Error::RegionOutsideDomain(_)));
    }
}
