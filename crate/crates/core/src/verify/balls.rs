//! Ball-based checks: the three-sphere inequality inside one subdomain and
//! the empirical propagation-of-smallness constant.

use rayon::prelude::*;
use serde::Serialize;

use super::report::{Provenance, VerificationReport};
use crate::error::{Error, Result};
use crate::fields::Rect;
use crate::functionals::{region_integral, region_integral_within, BoundaryTrace, Integrand, TraceNorms};
use crate::mat::{dist, Vec2};
use crate::solver::{DiscreteSolution, Tag, MARK_INCLUSION, MARK_INTERFACE};

pub const DEFAULT_THETA: f64 = 0.5;

fn ball_box(c: Vec2, r: f64) -> Rect {
    Rect::new(c[0] - r, c[0] + r, c[1] - r, c[1] + r)
}

/// `∫_{B(c, r)} |∇u|²` with cut elements subdivided.
pub fn ball_energy(sol: &DiscreteSolution, c: Vec2, r: f64) -> f64 {
    region_integral_within(sol, &|p| dist(p, c) < r, Integrand::Gradient, Some(ball_box(c, r))).value
}

/// Tags met by `B(c, r)`, or `None` when an interface or inclusion node lies
/// inside the ball.
fn ball_tags(sol: &DiscreteSolution, c: Vec2, r: f64) -> Option<Vec<Tag>> {
    let mesh = &sol.mesh;
    let crossing = (0..mesh.n_vertices()).any(|v| {
        mesh.markers[v] & (MARK_INTERFACE | MARK_INCLUSION) != 0 && dist(mesh.vertices[v], c) < r
    });
    if crossing {
        return None;
    }
    let mut tags: Vec<Tag> = (0..mesh.n_triangles())
        .filter(|&t| dist(mesh.centroid(t), c) < r)
        .map(|t| mesh.tags[t])
        .collect();
    tags.sort_by_key(|t| *t as usize);
    tags.dedup();
    Some(tags)
}

/// `∫_{B r2} / ((∫_{B r1})^θ (∫_{B r3})^{1-θ})` for `|∇u|²`, with `B(c, r3)`
/// inside the domain and inside a single subdomain.
pub fn three_sphere_check(
    experiment: &str,
    sol: &DiscreteSolution,
    center: Vec2,
    radii: [f64; 3],
    theta: f64,
    provenance: Provenance,
) -> Result<VerificationReport> {
    let [r1, r2, r3] = radii;
    if !(r1 > 0.0 && r1 < r2 && r2 < r3) {
        return Err(Error::InvalidInput(format!("radii must satisfy 0 < r1 < r2 < r3, got {r1}, {r2}, {r3}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!("theta = {theta} must lie in (0, 1)")));
    }
    let rect = sol.mesh.domain.rect;
    if !(rect.contains(center) && rect.inner_distance(center) >= r3) {
        return Err(Error::RegionOutsideDomain(format!(
            "B(({}, {}), {r3}) leaves the domain",
            center[0], center[1]
        )));
    }
    match ball_tags(sol, center, r3) {
        Some(tags) if tags.len() == 1 => {}
        _ => {
            return Err(Error::BallCrossesInterface {
                cx: center[0],
                cy: center[1],
                radius: r3,
            })
        }
    }
    let m: Vec<f64> = radii.iter().map(|&r| ball_energy(sol, center, r)).collect();
    let provenance = provenance
        .param("theta", theta)
        .param("r1", r1)
        .param("r2", r2)
        .param("r3", r3)
        .param("cx", center[0])
        .param("cy", center[1]);
    Ok(VerificationReport::new(
        experiment,
        "three_sphere",
        m[1],
        m[0],
        m[2],
        theta,
        1.0 - theta,
        provenance,
    ))
}

/// Grid of centers with spacing `spacing` whose `rho`-balls stay inside
/// `rect`.
pub fn center_grid(rect: Rect, rho: f64, spacing: f64) -> Vec<Vec2> {
    let (x0, x1, y0, y1) = (rect.x0 + rho, rect.x1 - rho, rect.y0 + rho, rect.y1 - rho);
    if x0 > x1 || y0 > y1 || !(spacing > 0.0) {
        return Vec::new();
    }
    let nx = ((x1 - x0) / spacing).floor() as usize;
    let ny = ((y1 - y0) / spacing).floor() as usize;
    // centre the grid in the admissible box
    let ox = x0 + 0.5 * ((x1 - x0) - nx as f64 * spacing);
    let oy = y0 + 0.5 * ((y1 - y0) - ny as f64 * spacing);
    let mut out = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            out.push([ox + i as f64 * spacing, oy + j as f64 * spacing]);
        }
    }
    out
}

/// `sup |∂_t φ| / ‖φ - φ₀‖_{H^{1/2}}` together with the underlying norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryDataProxy {
    pub norms: TraceNorms,
    #[serde(with = "crate::json::extended")]
    pub ratio: f64,
}

pub fn boundary_data_proxy(trace: &BoundaryTrace, alpha_prime: f64) -> Result<BoundaryDataProxy> {
    let norms = trace.norms(alpha_prime)?;
    let ratio = if norms.h_half > 0.0 {
        norms.sup_tangential / norms.h_half
    } else {
        f64::INFINITY
    };
    Ok(BoundaryDataProxy { norms, ratio })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropagationResult {
    pub rho: f64,
    /// Smallest `∫_{B(x, ρ)} |∇u|² / ∫_Ω |∇u|²` over admissible centers.
    pub constant: f64,
    pub argmin: Vec2,
    pub max_ratio: f64,
    pub admissible_centers: usize,
    pub rejected_centers: usize,
    pub total_energy: f64,
    pub boundary_data: BoundaryDataProxy,
}

/// Hölder exponent used for the boundary-data proxy when none is given.
pub const PROXY_ALPHA_PRIME: f64 = 0.1;

/// Minimum relative ball energy over the centers whose balls lie inside
/// `Ω₊` (plus side and inclusion, away from the interface).
pub fn propagation_constant(sol: &DiscreteSolution, rho: f64, centers: &[Vec2]) -> Result<PropagationResult> {
    if !(rho > 0.0) {
        return Err(Error::InvalidInput(format!("rho = {rho} must be positive")));
    }
    let total = region_integral(sol, &|_| true, Integrand::Gradient).value;
    let rect = sol.mesh.domain.rect;
    let amplitude = sol.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // rounding-level gradients of a constant solve
    if total <= 1e-20 * amplitude * amplitude * rect.area() {
        return Err(Error::ConstantSolution);
    }
    let ratios: Vec<Option<(Vec2, f64)>> = centers
        .par_iter()
        .map(|&c| {
            if !(rect.contains(c) && rect.inner_distance(c) >= rho) {
                return None;
            }
            let tags = ball_tags(sol, c, rho)?;
            if tags.is_empty() || tags.contains(&Tag::Minus) {
                return None;
            }
            Some((c, ball_energy(sol, c, rho) / total))
        })
        .collect();
    let admissible: Vec<(Vec2, f64)> = ratios.iter().flatten().copied().collect();
    let (argmin, constant) = admissible
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::NoAdmissibleCenters(rho))?;
    let max_ratio = admissible.iter().map(|a| a.1).fold(0.0, f64::max);
    let samples = ((rect.perimeter() / (0.5 * sol.mesh.h)).ceil() as usize).clamp(64, 4096);
    let trace = BoundaryTrace::from_solution(sol, samples)?;
    Ok(PropagationResult {
        rho,
        constant,
        argmin,
        max_ratio,
        admissible_centers: admissible.len(),
        rejected_centers: centers.len() - admissible.len(),
        total_energy: total,
        boundary_data: boundary_data_proxy(&trace, PROXY_ALPHA_PRIME)?,
    })
}
