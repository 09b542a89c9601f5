//! Inclusion shapes, contrast conditions and the fatness test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::coefficient::{MatrixField, PiecewiseCoefficient, Rect};
use crate::error::{Error, Result};
use crate::geometry::{InterfaceGraph, Side};
use crate::mat::{dist, Mat2, Vec2};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disk {
        center: Vec2,
        radius: f64,
    },
    Ellipse {
        center: Vec2,
        semi_axes: Vec2,
        /// Rotation of the first semi-axis, radians.
        #[serde(default)]
        angle: f64,
    },
    /// Simple polygon, vertices in either orientation.
    Polygon { vertices: Vec<Vec2> },
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        match self {
            Shape::Disk { radius, .. } if !(*radius > 0.0) => {
                Err(Error::InvalidInput(format!("disk radius {radius} must be positive")))
            }
            Shape::Ellipse { semi_axes, .. } if !(semi_axes[0] > 0.0 && semi_axes[1] > 0.0) => {
                Err(Error::InvalidInput("ellipse semi-axes must be positive".into()))
            }
            Shape::Polygon { vertices } if vertices.len() < 3 => {
                Err(Error::InvalidInput("polygon needs at least 3 vertices".into()))
            }
            Shape::Polygon { vertices } if polygon_area(vertices).abs() == 0.0 => {
                Err(Error::InvalidInput("degenerate polygon".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Shape::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Shape::Ellipse { semi_axes, .. } => std::f64::consts::PI * semi_axes[0] * semi_axes[1],
            Shape::Polygon { vertices } => polygon_area(vertices).abs(),
        }
    }

    pub fn bbox(&self) -> Rect {
        match self {
            Shape::Disk { center: c, radius: r } => Rect::new(c[0] - r, c[0] + r, c[1] - r, c[1] + r),
            Shape::Ellipse { center: c, semi_axes: s, .. } => {
                let r = s[0].max(s[1]);
                Rect::new(c[0] - r, c[0] + r, c[1] - r, c[1] + r)
            }
            Shape::Polygon { vertices } => {
                let mut r = Rect::new(f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
                for v in vertices {
                    r.x0 = r.x0.min(v[0]);
                    r.x1 = r.x1.max(v[0]);
                    r.y0 = r.y0.min(v[1]);
                    r.y1 = r.y1.max(v[1]);
                }
                r
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.signed_distance(p) < 0.0
    }

    /// Nearest point of the boundary.
    pub fn project(&self, p: Vec2) -> Vec2 {
        match self {
            Shape::Disk { center: c, radius: r } => {
                let d = dist(p, *c);
                if d == 0.0 {
                    [c[0] + r, c[1]]
                } else {
                    [c[0] + r * (p[0] - c[0]) / d, c[1] + r * (p[1] - c[1]) / d]
                }
            }
            Shape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let q = to_ellipse_frame(p, *center, *angle);
                let b = ellipse_nearest(q, *semi_axes);
                from_ellipse_frame(b, *center, *angle)
            }
            Shape::Polygon { vertices } => {
                let mut best = (f64::INFINITY, p);
                for (a, b) in edges(vertices) {
                    let c = closest_on_segment(p, a, b);
                    let d = dist(p, c);
                    if d < best.0 {
                        best = (d, c);
                    }
                }
                best.1
            }
        }
    }

    /// Negative inside, positive outside, magnitude = distance to boundary.
    pub fn signed_distance(&self, p: Vec2) -> f64 {
        match self {
            Shape::Disk { center, radius } => dist(p, *center) - radius,
            Shape::Ellipse {
                center,
                semi_axes,
                angle,
            } => {
                let q = to_ellipse_frame(p, *center, *angle);
                let inside = (q[0] / semi_axes[0]).powi(2) + (q[1] / semi_axes[1]).powi(2) < 1.0;
                let d = dist(q, ellipse_nearest(q, *semi_axes));
                if inside {
                    -d
                } else {
                    d
                }
            }
            Shape::Polygon { vertices } => {
                let d = dist(p, self.project(p));
                if point_in_polygon(p, vertices) {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Points on the boundary, roughly `spacing` apart.
    pub fn boundary_samples(&self, spacing: f64) -> Vec<Vec2> {
        match self {
            Shape::Disk { center: c, radius: r } => {
                let n = ((std::f64::consts::TAU * r / spacing).ceil() as usize).max(16);
                (0..n)
                    .map(|i| {
                        let t = std::f64::consts::TAU * i as f64 / n as f64;
                        [c[0] + r * t.cos(), c[1] + r * t.sin()]
                    })
                    .collect()
            }
            Shape::Ellipse {
                center,
                semi_axes: s,
                angle,
            } => {
                let n = ((std::f64::consts::TAU * s[0].max(s[1]) / spacing).ceil() as usize).max(16);
                (0..n)
                    .map(|i| {
                        let t = std::f64::consts::TAU * i as f64 / n as f64;
                        from_ellipse_frame([s[0] * t.cos(), s[1] * t.sin()], *center, *angle)
                    })
                    .collect()
            }
            Shape::Polygon { vertices } => {
                let mut out = Vec::new();
                for (a, b) in edges(vertices) {
                    let n = ((dist(a, b) / spacing).ceil() as usize).max(1);
                    for i in 0..n {
                        let t = i as f64 / n as f64;
                        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                    }
                }
                out
            }
        }
    }
}

fn to_ellipse_frame(p: Vec2, c: Vec2, angle: f64) -> Vec2 {
    let (s, co) = angle.sin_cos();
    let d = [p[0] - c[0], p[1] - c[1]];
    [co * d[0] + s * d[1], -s * d[0] + co * d[1]]
}

fn from_ellipse_frame(q: Vec2, c: Vec2, angle: f64) -> Vec2 {
    let (s, co) = angle.sin_cos();
    [c[0] + co * q[0] - s * q[1], c[1] + s * q[0] + co * q[1]]
}

/// Nearest point on the axis-aligned ellipse `(x/a)² + (y/b)² = 1`, by
/// Newton iteration on the angle parameter from several starting angles.
fn ellipse_nearest(q: Vec2, s: Vec2) -> Vec2 {
    let (a, b) = (s[0], s[1]);
    let point = |t: f64| [a * t.cos(), b * t.sin()];
    let mut best = (f64::INFINITY, [a, 0.0]);
    for k in 0..8 {
        let mut t = std::f64::consts::TAU * k as f64 / 8.0;
        for _ in 0..50 {
            let (st, ct) = t.sin_cos();
            // f(t) = d/dt |P(t) - q|² / 2
            let f = (a * ct - q[0]) * (-a * st) + (b * st - q[1]) * (b * ct);
            let df = a * a * st * st + b * b * ct * ct - (a * ct - q[0]) * a * ct - (b * st - q[1]) * b * st;
            if df.abs() < 1e-300 {
                break;
            }
            let step = f / df;
            t -= step.clamp(-0.5, 0.5);
            if step.abs() < 1e-15 {
                break;
            }
        }
        let pt = point(t);
        let d = dist(pt, q);
        if d < best.0 {
            best = (d, pt);
        }
    }
    best.1
}

fn edges(v: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    (0..v.len()).map(move |i| (v[i], v[(i + 1) % v.len()]))
}

fn polygon_area(v: &[Vec2]) -> f64 {
    0.5 * edges(v).map(|(a, b)| a[0] * b[1] - b[0] * a[1]).sum::<f64>()
}

fn closest_on_segment(p: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    };
    [a[0] + t * ab[0], a[1] + t * ab[1]]
}

fn point_in_polygon(p: Vec2, v: &[Vec2]) -> bool {
    let mut inside = false;
    for (a, b) in edges(v) {
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Area of the erosion `D_h = {x ∈ D : dist(x, ∂D) > h}` and an upper bound
/// on its numerical error. Disks use the closed form; other shapes threshold
/// the signed distance at cell centres of a `resolution²` grid over the
/// bounding box.
pub fn eroded_area(shape: &Shape, h: f64, resolution: usize) -> (f64, f64) {
    if let Shape::Disk { radius, .. } = shape {
        let r = (radius - h).max(0.0);
        return (std::f64::consts::PI * r * r, 0.0);
    }
    let bb = shape.bbox();
    let n = resolution.max(16);
    let (dx, dy) = (bb.width() / n as f64, bb.height() / n as f64);
    let mut count = 0usize;
    for i in 0..n {
        let x = bb.x0 + (i as f64 + 0.5) * dx;
        for j in 0..n {
            let y = bb.y0 + (j as f64 + 0.5) * dy;
            if shape.signed_distance([x, y]) < -h {
                count += 1;
            }
        }
    }
    let cell = dx * dy;
    // cells straddling the level set {sd = -h}; its length is at most the
    // perimeter of D
    let perimeter = perimeter(shape);
    let err = perimeter * dx.hypot(dy);
    (count as f64 * cell, err)
}

fn perimeter(shape: &Shape) -> f64 {
    let pts = shape.boundary_samples(shape.bbox().width().max(shape.bbox().height()) / 512.0);
    let n = pts.len();
    (0..n).map(|i| dist(pts[i], pts[(i + 1) % n])).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpType {
    /// `(1 + η) A ≤ Â ≤ ζ A`, `ζ > 1`
    Raise,
    /// `ζ A ≤ Â ≤ (1 − η) A`, `0 < ζ < 1`
    Lower,
}

impl std::fmt::Display for JumpType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            JumpType::Raise => "raise",
            JumpType::Lower => "lower",
        })
    }
}

/// How the perturbed coefficient on `D` is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InclusionCoefficient {
    /// `Â = factor · A₊`
    Scaled { factor: f64 },
    /// An explicit field.
    Field { field: MatrixField },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionScenario {
    pub shape: Shape,
    pub a_hat: InclusionCoefficient,
    pub eta: f64,
    pub zeta: f64,
    pub jump: JumpType,
    /// Required `dist(D, ∂Ω₊)`.
    #[serde(default)]
    pub d1: Option<f64>,
    /// Fatness parameter.
    #[serde(default)]
    pub h: Option<f64>,
}

impl InclusionScenario {
    /// `Â` at a point, given the background coefficient.
    pub fn a_hat(&self, background: &PiecewiseCoefficient, p: Vec2) -> Mat2 {
        match &self.a_hat {
            InclusionCoefficient::Scaled { factor } => background.eval(Side::Plus, p) * *factor,
            InclusionCoefficient::Field { field } => field.eval(p),
        }
    }

    pub fn a_hat_field(&self, background: &PiecewiseCoefficient) -> MatrixField {
        match &self.a_hat {
            InclusionCoefficient::Scaled { factor } => background.plus.scaled(*factor),
            InclusionCoefficient::Field { field } => field.clone(),
        }
    }

    /// A copy with the contrast removed (`Â = A`).
    pub fn without_contrast(&self) -> Self {
        InclusionScenario {
            a_hat: InclusionCoefficient::Scaled { factor: 1.0 },
            ..self.clone()
        }
    }
}

/// Where `Ω₊` lives: the outer rectangle and, if present, the interface
/// below which `Ω₋` lies.
#[derive(Clone, Copy, Debug)]
pub struct InclusionContext<'a> {
    pub domain: Rect,
    pub interface: Option<&'a InterfaceGraph>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InclusionValidation {
    pub area: f64,
    pub eroded_area: Option<f64>,
    pub fatness_ratio: Option<f64>,
    pub distance_to_plus_boundary: f64,
    pub min_contrast_eigenvalue: f64,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// Distance from `D` to `∂Ω₊` by dense sampling of `∂D`; negative when `D`
/// leaves `Ω₊`.
pub fn distance_to_plus_boundary(shape: &Shape, ctx: &InclusionContext<'_>) -> f64 {
    let bb = shape.bbox();
    let spacing = bb.width().max(bb.height()) / 400.0;
    let mut best = f64::INFINITY;
    for p in shape.boundary_samples(spacing) {
        let mut d = ctx.domain.inner_distance(p);
        if let Some(g) = ctx.interface {
            if g.side_offset(p) < 0.0 {
                return -1.0;
            }
            d = d.min(distance_to_graph(g, p, ctx.domain));
        }
        best = best.min(d);
    }
    best
}

/// Distance from a point to the interface curve over the domain's x-range.
pub fn distance_to_graph(g: &InterfaceGraph, p: Vec2, domain: Rect) -> f64 {
    let n = 2000;
    let mut best = f64::INFINITY;
    let (mut lo, mut hi) = (domain.x0, domain.x1);
    // coarse scan, then refine around the minimiser
    for _ in 0..3 {
        let mut arg = lo;
        for i in 0..=n {
            let x = lo + (hi - lo) * i as f64 / n as f64;
            let d = dist(p, [x, g.height_at(x)]);
            if d < best {
                best = d;
                arg = x;
            }
        }
        let w = (hi - lo) / n as f64;
        lo = (arg - 2.0 * w).max(domain.x0);
        hi = (arg + 2.0 * w).min(domain.x1);
    }
    best
}

/// Checks the contrast condition pointwise on samples inside `D`, the
/// separation `d1`, and the fatness condition when `h` is set.
pub fn validate_inclusion(
    s: &InclusionScenario,
    background: &PiecewiseCoefficient,
    ctx: &InclusionContext<'_>,
    sample_count: usize,
    seed: u64,
) -> Result<InclusionValidation> {
    s.shape.validate()?;
    if !(s.eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta = {} must be positive", s.eta)));
    }
    let mut violations = Vec::new();
    match s.jump {
        JumpType::Raise if !(s.zeta > 1.0) => violations.push(format!("raise requires zeta > 1, got {}", s.zeta)),
        JumpType::Lower if !(s.zeta > 0.0 && s.zeta < 1.0) => {
            violations.push(format!("lower requires 0 < zeta < 1, got {}", s.zeta))
        }
        _ => {}
    }
    let tol = 1e-12;
    let bb = s.shape.bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_contrast = f64::INFINITY;
    let mut taken = 0usize;
    let mut attempts = 0usize;
    while taken < sample_count.max(1) && attempts < 100 * sample_count.max(1) {
        attempts += 1;
        let p = bb.sample(&mut rng);
        if !s.shape.contains(p) {
            continue;
        }
        taken += 1;
        let a = background.eval(Side::Plus, p);
        let ah = s.a_hat(background, p);
        let (lower_ok, upper_ok) = match s.jump {
            JumpType::Raise => (
                (ah - a * (1.0 + s.eta)).sym_eigenvalues().0 >= -tol,
                (a * s.zeta - ah).sym_eigenvalues().0 >= -tol,
            ),
            JumpType::Lower => (
                (ah - a * s.zeta).sym_eigenvalues().0 >= -tol,
                (a * (1.0 - s.eta) - ah).sym_eigenvalues().0 >= -tol,
            ),
        };
        let signed = match s.jump {
            JumpType::Raise => ah - a,
            JumpType::Lower => a - ah,
        };
        min_contrast = min_contrast.min(signed.sym_eigenvalues().0);
        if !lower_ok && violations.len() < 8 {
            violations.push(format!("lower matrix bound of {} fails at ({}, {})", s.jump, p[0], p[1]));
        }
        if !upper_ok && violations.len() < 8 {
            violations.push(format!("upper matrix bound of {} fails at ({}, {})", s.jump, p[0], p[1]));
        }
    }
    let d_plus = distance_to_plus_boundary(&s.shape, ctx);
    if d_plus < 0.0 {
        violations.push("D is not contained in the plus subdomain".into());
    }
    if let Some(d1) = s.d1 {
        if d_plus < d1 {
            violations.push(format!("dist(D, ∂Ω₊) = {d_plus} < d1 = {d1}"));
        }
    }
    let area = s.shape.area();
    let (eroded, ratio) = match s.h {
        Some(h) => {
            let (e, err) = eroded_area(&s.shape, h, 1024);
            let ratio = e / area;
            if e + err < 0.5 * area * (1.0 - 1e-12) {
                violations.push(format!("fatness |D_h| >= |D|/2 fails: |D_h|/|D| = {ratio}"));
            }
            (Some(e), Some(ratio))
        }
        None => (None, None),
    };
    Ok(InclusionValidation {
        area,
        eroded_area: eroded,
        fatness_ratio: ratio,
        distance_to_plus_boundary: d_plus,
        min_contrast_eigenvalue: min_contrast,
        passed: violations.is_empty(),
        violations,
    })
}
