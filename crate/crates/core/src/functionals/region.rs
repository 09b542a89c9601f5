//! Integrals of `u²` and `|∇u|²` over regions given by predicates.

use serde::Serialize;

use crate::fields::Rect;
use crate::geometry::{PhysicalRegions, RegionId};
use crate::mat::Vec2;
use crate::solver::DiscreteSolution;

pub type Region<'a> = &'a (dyn Fn(Vec2) -> bool + Sync);

const MAX_DEPTH: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrand {
    /// `u²`
    Value,
    /// `|∇u|²`
    Gradient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionIntegral {
    pub value: f64,
    /// Measure of the region as resolved by the quadrature.
    pub area: f64,
    pub empty: bool,
}

/// Integral over `{p : region(p)}`. Elements whose seven sample points
/// (vertices, edge midpoints, centroid) disagree are split into four, down
/// to four levels, and the finest pieces are classified by their centroids.
pub fn region_integral(sol: &DiscreteSolution, region: Region<'_>, integrand: Integrand) -> RegionIntegral {
    region_integral_within(sol, region, integrand, None)
}

/// [`region_integral`] for a region known to lie inside `bbox`: elements
/// that miss the box are skipped without sampling the predicate.
pub fn region_integral_within(
    sol: &DiscreteSolution,
    region: Region<'_>,
    integrand: Integrand,
    bbox: Option<Rect>,
) -> RegionIntegral {
    let mesh = &sol.mesh;
    let parts: Vec<(f64, f64)> = (0..mesh.n_triangles())
        .map(|t| {
            if let Some(b) = bbox {
                let c = mesh.corners(t);
                let (x0, x1) = (c[0][0].min(c[1][0]).min(c[2][0]), c[0][0].max(c[1][0]).max(c[2][0]));
                let (y0, y1) = (c[0][1].min(c[1][1]).min(c[2][1]), c[0][1].max(c[1][1]).max(c[2][1]));
                if x1 < b.x0 || x0 > b.x1 || y1 < b.y0 || y0 > b.y1 {
                    return (0.0, 0.0);
                }
            }
            let tri = mesh.triangles[t];
            let u = [sol.values[tri[0]], sol.values[tri[1]], sol.values[tri[2]]];
            let g = sol.gradients[t];
            let piece = Piece {
                p: mesh.corners(t),
                u,
            };
            integrate_piece(&piece, g, region, integrand, 0)
        })
        .collect();
    let (value, area) = parts.iter().fold((0.0, 0.0), |(v, a), (pv, pa)| (v + pv, a + pa));
    RegionIntegral {
        value,
        area,
        empty: area == 0.0,
    }
}

struct Piece {
    p: [Vec2; 3],
    u: [f64; 3],
}

fn mid(a: Vec2, b: Vec2) -> Vec2 {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
}

fn exact(piece: &Piece, g: Vec2, integrand: Integrand) -> (f64, f64) {
    let [a, b, c] = piece.p;
    let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]));
    let u = piece.u;
    let value = match integrand {
        Integrand::Value => {
            area / 6.0 * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[0] * u[1] + u[1] * u[2] + u[0] * u[2])
        }
        Integrand::Gradient => area * (g[0] * g[0] + g[1] * g[1]),
    };
    (value, area)
}

fn integrate_piece(piece: &Piece, g: Vec2, region: Region<'_>, integrand: Integrand, depth: u32) -> (f64, f64) {
    let [a, b, c] = piece.p;
    let centroid = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
    if depth == MAX_DEPTH {
        return if region(centroid) {
            exact(piece, g, integrand)
        } else {
            (0.0, 0.0)
        };
    }
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    let samples = [a, b, c, ab, bc, ca, centroid];
    let inside = samples.iter().filter(|&&p| region(p)).count();
    if inside == samples.len() {
        return exact(piece, g, integrand);
    }
    if inside == 0 {
        return (0.0, 0.0);
    }
    let u = piece.u;
    let (uab, ubc, uca) = ((u[0] + u[1]) / 2.0, (u[1] + u[2]) / 2.0, (u[2] + u[0]) / 2.0);
    let children = [
        Piece {
            p: [a, ab, ca],
            u: [u[0], uab, uca],
        },
        Piece {
            p: [ab, b, bc],
            u: [uab, u[1], ubc],
        },
        Piece {
            p: [ca, bc, c],
            u: [uca, ubc, u[2]],
        },
        Piece {
            p: [ab, bc, ca],
            u: [uab, ubc, uca],
        },
    ];
    children.iter().fold((0.0, 0.0), |(v, ar), child| {
        let (cv, ca) = integrate_piece(child, g, region, integrand, depth + 1);
        (v + cv, ar + ca)
    })
}

/// `(m1, m2, m3)`: integrals over the three pulled-back regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionIntegralSet {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub integrand: Integrand,
}

pub fn region_integrals(sol: &DiscreteSolution, regions: &PhysicalRegions, integrand: Integrand) -> RegionIntegralSet {
    let m = |id: RegionId| region_integral(sol, &|p| regions.contains(id, p), integrand).value;
    RegionIntegralSet {
        m1: m(RegionId::U1),
        m2: m(RegionId::U2),
        m3: m(RegionId::U3),
        integrand,
    }
}

/// `∫ A∇u·∇u` over the elements, or over those whose centroid satisfies
/// `region` when given.
pub fn energy(sol: &DiscreteSolution, region: Option<Region<'_>>) -> f64 {
    let mesh = &sol.mesh;
    let terms: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| {
            if region.is_some_and(|r| !r(mesh.centroid(t))) {
                return 0.0;
            }
            mesh.area(t) * sol.coefficients[t].bilinear(sol.gradients[t], sol.gradients[t])
        })
        .collect();
    terms.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{PiecewiseCoefficient, Rect};
    use crate::solver::{build_mesh, solve_dirichlet, Domain};
    use std::sync::Arc;

    fn solve_unit(h: f64, phi: &(dyn Fn(Vec2) -> f64 + Sync)) -> DiscreteSolution {
        let mesh = Arc::new(build_mesh(&Domain::dirichlet(Rect::unit()), None, None, h).unwrap());
        solve_dirichlet(&PiecewiseCoefficient::isotropic(1.0, 1.0), None, None, mesh, phi).unwrap()
    }

    #[test]
    fn constant_over_whole_domain() {
        let sol = solve_unit(0.1, &|_| 1.0);
        let r = region_integral(&sol, &|_| true, Integrand::Value);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(!r.empty);
    }

    #[test]
    fn linear_values_and_gradients() {
        let sol = solve_unit(1.0 / 16.0, &|p| p[0]);
        // the half-plane boundary x = 1/2 is resolved to depth 4
        let half = region_integral(&sol, &|p| p[0] < 0.5, Integrand::Value);
        assert!((half.value - 1.0 / 24.0).abs() < 1e-3, "{}", half.value);
        let disk = |p: Vec2| (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) < 0.09;
        let g = region_integral(&sol, &disk, Integrand::Gradient);
        assert!((g.value - g.area).abs() < 1e-9);
        assert!((g.area - std::f64::consts::PI * 0.09).abs() < 2e-3);
    }

    #[test]
    fn empty_region_is_flagged() {
        let sol = solve_unit(0.25, &|p| p[0]);
        let r = region_integral(&sol, &|_| false, Integrand::Gradient);
        assert_eq!(r.value, 0.0);
        assert!(r.empty);
    }

    #[test]
    fn energy_of_linear_field() {
        let sol = solve_unit(0.125, &|p| 2.0 * p[0] + p[1]);
        assert!((energy(&sol, None) - 5.0).abs() < 1e-10);
    }
}
