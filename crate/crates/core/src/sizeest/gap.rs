//! Power gap measurement and the diagnostics behind the lower bound.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{InclusionScenario, PiecewiseCoefficient, Rect};
use crate::functionals::{power_report, region_integral, region_integral_within, BoundaryTrace, Integrand, PowerReport};
use crate::mat::Vec2;
use crate::solver::{DiscreteSolution, Medium, Mesh, Problem};

/// Spatial dimension of all experiments.
const DIM: f64 = 2.0;

/// Background and perturbed solutions on one inclusion-fitted mesh.
#[derive(Clone, Debug)]
pub struct GapMeasurement {
    pub report: PowerReport,
    pub background: DiscreteSolution,
    pub perturbed: DiscreteSolution,
}

/// Solves with and without the inclusion for the same boundary data and
/// compares the powers.
pub fn measure_gap(
    mesh: Arc<Mesh>,
    coefficient: &PiecewiseCoefficient,
    scenario: &InclusionScenario,
    phi: &(dyn Fn(Vec2) -> f64 + Sync),
) -> Result<GapMeasurement> {
    let perturbed_medium = Medium::new(coefficient.clone()).with_inclusion(scenario.clone());
    let background_medium = perturbed_medium.background();
    let background = Problem::new(mesh.clone(), &background_medium).solve(phi)?;
    let perturbed = Problem::new(mesh, &perturbed_medium).solve(phi)?;
    let report = power_report(&background, &background_medium, &perturbed, &perturbed_medium)?;
    Ok(GapMeasurement {
        report,
        background,
        perturbed,
    })
}

/// The quantities chained in the lower bound:
/// `‖∇u‖_{L∞(Ω_{d/2})} ≤ C ‖∇u‖_{L²(Ω)}` and
/// `∫_D |∇u|² ≤ |D| ‖∇u‖²_{L∞(Ω_{d/2})}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBoundIngredients {
    /// `dist(D, ∂Ω)`
    pub d: f64,
    pub grad_linf_interior: f64,
    pub grad_l2: f64,
    pub inclusion_energy: f64,
    pub inclusion_area: f64,
    /// `‖∇u‖_{L∞(Ω_{d/2})} / ‖∇u‖_{L²(Ω)}`
    pub linf_over_l2: f64,
    /// `∫_D |∇u|² / (|D| ‖∇u‖²_{L∞(Ω_{d/2})})`, at most 1.
    pub trivial_estimate: f64,
    /// `∫_D |∇u|² / ∫_Ω |∇u|²`
    pub energy_fraction: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

pub fn lower_bound_ingredients(sol: &DiscreteSolution, scenario: &InclusionScenario) -> LowerBoundIngredients {
    let mesh = &sol.mesh;
    let rect = mesh.domain.rect;
    let bb = scenario.shape.bbox();
    let spacing = bb.width().max(bb.height()) / 400.0;
    let d = scenario
        .shape
        .boundary_samples(spacing)
        .iter()
        .map(|&p| rect.inner_distance(p))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let grad_linf_interior = (0..mesh.n_triangles())
        .filter(|&t| rect.inner_distance(mesh.centroid(t)) > d / 2.0)
        .map(|t| sol.gradients[t][0].hypot(sol.gradients[t][1]))
        .fold(0.0, f64::max);
    let grad_l2 = region_integral(sol, &|_| true, Integrand::Gradient).value.sqrt();
    let inside = region_integral_within(sol, &|p| scenario.shape.contains(p), Integrand::Gradient, Some(bb));
    let inclusion_energy = inside.value;
    let inclusion_area = scenario.shape.area();
    LowerBoundIngredients {
        d,
        grad_linf_interior,
        grad_l2,
        inclusion_energy,
        inclusion_area,
        linf_over_l2: ratio(grad_linf_interior, grad_l2),
        trivial_estimate: ratio(inclusion_energy, inclusion_area * grad_linf_interior * grad_linf_interior),
        energy_fraction: ratio(inclusion_energy, grad_l2 * grad_l2),
    }
}

/// `‖φ - φ₀‖_{C^{1,α'}(∂Ω)} / ‖φ - φ₀‖_{H^{1/2}(∂Ω)}`, the boundary-data
/// frequency the constants depend on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryDataRatio {
    pub alpha: f64,
    pub alpha_prime: f64,
    pub phi0: f64,
    pub c1_alpha: f64,
    pub h_half: f64,
    #[serde(with = "crate::json::extended")]
    pub ratio: f64,
}

/// Default `α' = α / ((α + 1) · n · 2)`, half the admissible supremum.
pub fn default_alpha_prime(alpha: f64) -> f64 {
    alpha / ((alpha + 1.0) * DIM * 2.0)
}

pub fn boundary_data_ratio(
    rect: Rect,
    phi: &dyn Fn(Vec2) -> f64,
    alpha: f64,
    alpha_prime: Option<f64>,
    samples: usize,
) -> Result<BoundaryDataRatio> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("boundary Hölder exponent alpha = {alpha} must lie in (0, 1]")));
    }
    let alpha_prime = alpha_prime.unwrap_or_else(|| default_alpha_prime(alpha));
    let sup = alpha / ((alpha + 1.0) * DIM);
    if !(alpha_prime > 0.0 && alpha_prime < sup) {
        return Err(Error::InvalidInput(format!(
            "alpha' = {alpha_prime} must lie in (0, alpha / ((alpha + 1) n)) = (0, {sup})"
        )));
    }
    let trace = BoundaryTrace::from_fn(rect, phi, samples);
    let norms = trace.norms(alpha_prime)?;
    let ratio = if norms.h_half > 0.0 {
        norms.c1_alpha / norms.h_half
    } else {
        f64::INFINITY
    };
    Ok(BoundaryDataRatio {
        alpha,
        alpha_prime,
        phi0: norms.mean,
        c1_alpha: norms.c1_alpha,
        h_half: norms.h_half,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{InclusionCoefficient, JumpType, Shape};
    use crate::solver::{build_mesh, solve_dirichlet, Domain, RectSide};

    fn strip(width: f64) -> InclusionScenario {
        let (a, b) = (0.5 - width / 2.0, 0.5 + width / 2.0);
        InclusionScenario {
            shape: Shape::Polygon {
                vertices: vec![[0.0, a], [1.0, a], [1.0, b], [0.0, b]],
            },
            a_hat: InclusionCoefficient::Scaled { factor: 2.0 },
            eta: 0.5,
            zeta: 2.0,
            jump: JumpType::Raise,
            d1: None,
            h: None,
        }
    }

    fn series_gap(width: f64) -> PowerReport {
        let s = strip(width);
        let domain = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let mesh = Arc::new(build_mesh(&domain, None, Some(&s), 1.0 / 16.0).unwrap());
        measure_gap(mesh, &PiecewiseCoefficient::isotropic(1.0, 1.0), &s, &|p| p[1])
            .unwrap()
            .report
    }

    #[test]
    fn series_strip_gap_is_one_third() {
        let r = series_gap(0.5);
        assert!((r.w0 - 1.0).abs() < 1e-10);
        assert!((r.w - 4.0 / 3.0).abs() < 1e-10);
        assert!((r.normalized_gap - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn nested_strips_have_decreasing_gaps() {
        let (wide, narrow) = (series_gap(0.5), series_gap(0.25));
        // series law: W = 1 / (1 - w/2)
        assert!((narrow.w - 1.0 / (1.0 - 0.125)).abs() < 1e-10);
        assert!(wide.normalized_gap > narrow.normalized_gap);
    }

    #[test]
    fn no_contrast_means_no_gap() {
        let s = strip(0.5).without_contrast();
        let mesh = Arc::new(build_mesh(&Domain::dirichlet(Rect::unit()), None, Some(&s), 0.1).unwrap());
        let r = measure_gap(mesh, &PiecewiseCoefficient::isotropic(1.0, 1.0), &s, &|p| p[0] + p[1])
            .unwrap()
            .report;
        assert_eq!(r.gap, 0.0);
    }

    #[test]
    fn ingredients_for_linear_data() {
        let s = InclusionScenario {
            shape: Shape::Disk {
                center: [0.5, 0.5],
                radius: 0.2,
            },
            ..strip(0.5)
        };
        let mesh = Arc::new(build_mesh(&Domain::dirichlet(Rect::unit()), None, Some(&s), 1.0 / 32.0).unwrap());
        let sol = solve_dirichlet(&PiecewiseCoefficient::isotropic(1.0, 1.0), None, None, mesh.clone(), &|p| p[0])
            .unwrap();
        let ing = lower_bound_ingredients(&sol, &s);
        assert!((ing.grad_linf_interior - 1.0).abs() < 1e-9);
        assert!((ing.grad_l2 - 1.0).abs() < 1e-9);
        assert!((ing.inclusion_energy - s.shape.area()).abs() < 1e-3);
        assert!((ing.d - 0.3).abs() < 1e-6);
        let flat = solve_dirichlet(&PiecewiseCoefficient::isotropic(1.0, 1.0), None, None, mesh, &|_| 1.0).unwrap();
        let z = lower_bound_ingredients(&flat, &s);
        assert!(z.grad_l2 < 1e-9 && z.inclusion_energy < 1e-12);
    }

    #[test]
    fn boundary_ratio_uses_the_default_exponent() {
        let r = boundary_data_ratio(Rect::unit(), &|p| p[0] + 0.3 * p[1], 1.0, None, 256).unwrap();
        assert_eq!(r.alpha_prime, 0.125);
        assert!(r.ratio.is_finite() && r.ratio > 0.0);
        assert!(boundary_data_ratio(Rect::unit(), &|p| p[0], 1.0, Some(0.3), 256).is_err());
    }
}
