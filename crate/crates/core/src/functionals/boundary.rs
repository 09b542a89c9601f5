//! Traces on the boundary of a rectangle, sampled at uniform arclength.
//! The loop starts at the lower-left corner and runs counterclockwise.

use serde::Serialize;

use super::seminorm::h_half_seminorm_periodic;
use crate::error::{Error, Result};
use crate::fields::Rect;
use crate::mat::Vec2;
use crate::solver::{DiscreteSolution, MARK_OUTER};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTrace {
    pub rect: Rect,
    /// Values at arclengths `(k + 1/2) · spacing`.
    pub values: Vec<f64>,
    pub spacing: f64,
}

/// Norms of `φ - φ₀` used by the propagation and size estimates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceNorms {
    /// Boundary mean `φ₀`.
    pub mean: f64,
    pub sup: f64,
    /// Sup of the tangential derivative.
    pub sup_tangential: f64,
    /// Hölder seminorm of the tangential derivative, taken side by side.
    pub holder: f64,
    pub alpha_prime: f64,
    /// `sup + sup_tangential + holder`
    pub c1_alpha: f64,
    pub l2: f64,
    /// Square root of the periodic discrete seminorm.
    pub seminorm: f64,
    /// `sqrt(l2² + seminorm²)`
    pub h_half: f64,
}

/// Point at arclength `s` along the loop.
pub fn perimeter_point(rect: &Rect, s: f64) -> Vec2 {
    let (w, h) = (rect.width(), rect.height());
    let s = s.rem_euclid(rect.perimeter());
    if s < w {
        [rect.x0 + s, rect.y0]
    } else if s < w + h {
        [rect.x1, rect.y0 + (s - w)]
    } else if s < 2.0 * w + h {
        [rect.x1 - (s - w - h), rect.y1]
    } else {
        [rect.x0, rect.y1 - (s - 2.0 * w - h)]
    }
}

/// Arclength of a boundary point (the inverse of [`perimeter_point`]).
pub fn perimeter_arclength(rect: &Rect, p: Vec2) -> f64 {
    let (w, h) = (rect.width(), rect.height());
    let d = [
        (p[1] - rect.y0).abs(),
        (p[0] - rect.x1).abs(),
        (p[1] - rect.y1).abs(),
        (p[0] - rect.x0).abs(),
    ];
    let side = (0..4).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(0);
    match side {
        0 => p[0] - rect.x0,
        1 => w + (p[1] - rect.y0),
        2 => w + h + (rect.x1 - p[0]),
        _ => 2.0 * w + h + (rect.y1 - p[1]),
    }
}

impl BoundaryTrace {
    pub fn from_fn(rect: Rect, phi: impl Fn(Vec2) -> f64, n: usize) -> Self {
        let spacing = rect.perimeter() / n as f64;
        let values = (0..n)
            .map(|k| phi(perimeter_point(&rect, (k as f64 + 0.5) * spacing)))
            .collect();
        BoundaryTrace { rect, values, spacing }
    }

    /// Trace of a discrete solution, interpolated linearly between boundary
    /// nodes.
    pub fn from_solution(sol: &DiscreteSolution, n: usize) -> Result<Self> {
        let mesh = &sol.mesh;
        let rect = mesh.domain.rect;
        let mut nodes: Vec<(f64, f64)> = (0..mesh.n_vertices())
            .filter(|&v| mesh.markers[v] & MARK_OUTER != 0)
            .map(|v| (perimeter_arclength(&rect, mesh.vertices[v]), sol.values[v]))
            .collect();
        if nodes.len() < 3 {
            return Err(Error::InvalidInput("mesh has fewer than three boundary nodes".into()));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = rect.perimeter();
        let spacing = total / n as f64;
        let m = nodes.len();
        let mut j = 0;
        let values = (0..n)
            .map(|k| {
                let s = (k as f64 + 0.5) * spacing;
                while j + 1 < m && nodes[j + 1].0 <= s {
                    j += 1;
                }
                // bracket [nodes[j], nodes[j+1]], wrapping around the loop
                let (s0, v0, s1, v1) = if s < nodes[0].0 {
                    (nodes[m - 1].0 - total, nodes[m - 1].1, nodes[0].0, nodes[0].1)
                } else if j + 1 < m {
                    (nodes[j].0, nodes[j].1, nodes[j + 1].0, nodes[j + 1].1)
                } else {
                    (nodes[m - 1].0, nodes[m - 1].1, nodes[0].0 + total, nodes[0].1)
                };
                let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
                v0 + t * (v1 - v0)
            })
            .collect();
        Ok(BoundaryTrace { rect, values, spacing })
    }

    /// Trapezoid-rule mean over the loop.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn side(&self, k: usize) -> usize {
        let s = (k as f64 + 0.5) * self.spacing;
        let (w, h) = (self.rect.width(), self.rect.height());
        [w, w + h, 2.0 * w + h]
            .iter()
            .filter(|&&edge| s >= edge)
            .count()
    }

    /// Tangential derivative at each sample; one-sided next to corners.
    pub fn tangential_derivative(&self) -> Vec<f64> {
        let n = self.values.len();
        let f = &self.values;
        (0..n)
            .map(|k| {
                let (prev, next) = ((k + n - 1) % n, (k + 1) % n);
                let side = self.side(k);
                match (self.side(prev) == side, self.side(next) == side) {
                    (true, true) => (f[next] - f[prev]) / (2.0 * self.spacing),
                    (false, true) => (f[next] - f[k]) / self.spacing,
                    (true, false) => (f[k] - f[prev]) / self.spacing,
                    (false, false) => 0.0,
                }
            })
            .collect()
    }

    /// Norms of `φ - φ₀` with Hölder exponent `alpha_prime`.
    pub fn norms(&self, alpha_prime: f64) -> Result<TraceNorms> {
        if !(alpha_prime > 0.0 && alpha_prime < 1.0) {
            return Err(Error::InvalidInput(format!("Hölder exponent {alpha_prime} must lie in (0, 1)")));
        }
        let mean = self.mean();
        let g: Vec<f64> = self.values.iter().map(|v| v - mean).collect();
        let sup = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dg = self.tangential_derivative();
        let sup_tangential = dg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let n = g.len();
        let mut holder = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                if self.side(i) != self.side(j) {
                    continue;
                }
                let d = (j - i) as f64 * self.spacing;
                holder = holder.max((dg[i] - dg[j]).abs() / d.powf(alpha_prime));
            }
        }
        let l2 = (g.iter().map(|v| v * v).sum::<f64>() * self.spacing).sqrt();
        let seminorm = h_half_seminorm_periodic(&g, self.spacing)?.sqrt();
        Ok(TraceNorms {
            mean,
            sup,
            sup_tangential,
            holder,
            alpha_prime,
            c1_alpha: sup + sup_tangential + holder,
            l2,
            seminorm,
            h_half: l2.hypot(seminorm),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::PiecewiseCoefficient;
    use crate::solver::{build_mesh, solve_dirichlet, Domain};
    use std::sync::Arc;

    #[test]
    fn arclength_round_trip() {
        let r = Rect::new(-1.0, 2.0, 0.5, 1.5);
        for k in 0..80 {
            let s = k as f64 * r.perimeter() / 80.0 + 0.013;
            let back = perimeter_arclength(&r, perimeter_point(&r, s));
            assert!((back - s).abs() < 1e-12, "{s} {back}");
        }
    }

    #[test]
    fn mean_of_linear_data_on_unit_square() {
        // x has boundary mean 1/2 on the unit square by symmetry
        let t = BoundaryTrace::from_fn(Rect::unit(), |p| p[0], 400);
        assert!((t.mean() - 0.5).abs() < 1e-12);
        let n = t.norms(0.2).unwrap();
        assert!((n.sup - 0.5).abs() < 1e-2);
        // |∂t x| is 1 on the horizontal sides and 0 on the vertical ones
        assert!((n.sup_tangential - 1.0).abs() < 1e-12);
        assert!(n.holder < 1e-9);
        assert!(n.h_half > 0.0);
    }

    #[test]
    fn constant_trace_has_zero_norms() {
        let n = BoundaryTrace::from_fn(Rect::unit(), |_| 3.0, 64).norms(0.1).unwrap();
        assert_eq!(n.h_half, 0.0);
        assert_eq!(n.c1_alpha, 0.0);
    }

    #[test]
    fn solution_trace_matches_data() {
        let mesh = Arc::new(build_mesh(&Domain::dirichlet(Rect::unit()), None, None, 0.1).unwrap());
        let phi = |p: Vec2| p[0] * p[0] - p[1];
        let sol = solve_dirichlet(&PiecewiseCoefficient::isotropic(1.0, 1.0), None, None, mesh, &phi).unwrap();
        let a = BoundaryTrace::from_solution(&sol, 200).unwrap();
        let b = BoundaryTrace::from_fn(Rect::unit(), phi, 200);
        let err = a.values.iter().zip(&b.values).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        // interpolating x² (second derivative 2) between nodes h apart
        assert!(err <= 0.1 * 0.1 / 4.0 + 1e-12, "{err}");
    }
}
