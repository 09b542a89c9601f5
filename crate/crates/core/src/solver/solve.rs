//! P1 assembly and the Dirichlet solve.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::linalg::{solve, CsrMatrix, SolveStats, SolverOptions};
use super::mesh::{Mesh, Tag, MARK_INTERFACE};
use crate::error::{Error, Result};
use crate::fields::{InclusionScenario, LowerOrderTerms, MatrixField, PiecewiseCoefficient, TransmissionData};
use crate::geometry::Side;
use crate::mat::{dot, Mat2, Vec2};

/// Barycentric 3-point rule, exact for quadratics.
const GAUSS3: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

/// Everything that determines the operator: background coefficient,
/// optional inclusion and optional lower-order terms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Medium {
    pub coefficient: PiecewiseCoefficient,
    pub inclusion: Option<InclusionScenario>,
    pub lower_order: Option<LowerOrderTerms>,
}

impl Medium {
    pub fn new(coefficient: PiecewiseCoefficient) -> Self {
        Medium {
            coefficient,
            inclusion: None,
            lower_order: None,
        }
    }

    pub fn with_inclusion(mut self, s: InclusionScenario) -> Self {
        self.inclusion = Some(s);
        self
    }

    pub fn with_lower_order(mut self, l: LowerOrderTerms) -> Self {
        self.lower_order = Some(l);
        self
    }

    /// Same medium with the inclusion contrast removed.
    pub fn background(&self) -> Self {
        Medium {
            inclusion: None,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        crate::json::fingerprint(self).expect("medium serializes")
    }

    fn field_for(&self, tag: Tag) -> Option<MatrixField> {
        match tag {
            Tag::Plus => Some(self.coefficient.plus.clone()),
            Tag::Minus => Some(self.coefficient.minus.clone()),
            Tag::Inclusion => match &self.inclusion {
                Some(s) => Some(s.a_hat_field(&self.coefficient)),
                None => Some(self.coefficient.plus.clone()),
            },
        }
    }

    /// Element average of the coefficient: exact for constant fields, the
    /// 3-point rule otherwise.
    pub fn element_coefficient(&self, tag: Tag, corners: [Vec2; 3]) -> Mat2 {
        let field = self.field_for(tag).expect("every tag has a field");
        let centroid = [
            (corners[0][0] + corners[1][0] + corners[2][0]) / 3.0,
            (corners[0][1] + corners[1][1] + corners[2][1]) / 3.0,
        ];
        if field.is_constant() {
            return field.eval(centroid);
        }
        GAUSS3.iter().fold(Mat2::ZERO, |acc, w| {
            let p = barycentric_point(corners, *w);
            acc + field.eval(p) * (1.0 / 3.0)
        })
    }

    pub fn side_of(tag: Tag) -> Side {
        match tag {
            Tag::Minus => Side::Minus,
            _ => Side::Plus,
        }
    }
}

fn barycentric_point(c: [Vec2; 3], w: [f64; 3]) -> Vec2 {
    [
        w[0] * c[0][0] + w[1] * c[1][0] + w[2] * c[2][0],
        w[0] * c[0][1] + w[1] * c[1][1] + w[2] * c[2][1],
    ]
}

/// Gradients of the three P1 basis functions and the element area.
pub fn basis_gradients(c: [Vec2; 3]) -> ([Vec2; 3], f64) {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let area = 0.5 * det;
    let g = |i: usize| {
        let (b, d) = (c[(i + 1) % 3], c[(i + 2) % 3]);
        [(b[1] - d[1]) / det, (d[0] - b[0]) / det]
    };
    ([g(0), g(1), g(2)], area)
}

/// Source term `f` in `div(A∇u) + W·∇u + Vu = f`.
pub type Source<'a> = &'a (dyn Fn(Vec2) -> f64 + Sync);

/// Solution of `div(A∇u) + W·∇u + Vu = f` with Dirichlet data on the
/// Dirichlet sides and zero conormal flux on the natural ones.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
    /// Constant gradient per triangle.
    pub gradients: Vec<Vec2>,
    /// Element-averaged coefficient used in assembly.
    pub coefficients: Vec<Mat2>,
    pub medium_fingerprint: String,
    /// `(node, prescribed value)` for every Dirichlet node.
    pub dirichlet: Vec<(usize, f64)>,
    pub stats: SolveStats,
}

pub struct Problem<'a> {
    pub mesh: Arc<Mesh>,
    pub medium: &'a Medium,
    pub source: Option<Source<'a>>,
    pub options: SolverOptions,
}

impl<'a> Problem<'a> {
    pub fn new(mesh: Arc<Mesh>, medium: &'a Medium) -> Self {
        Problem {
            mesh,
            medium,
            source: None,
            options: SolverOptions::default(),
        }
    }

    pub fn with_source(mut self, f: Source<'a>) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    pub fn solve(&self, phi: &(dyn Fn(Vec2) -> f64 + Sync)) -> Result<DiscreteSolution> {
        let mesh = &self.mesh;
        let medium = self.medium;
        if let Some(l) = &medium.lower_order {
            l.validate(medium.coefficient.lambda0)?;
        }
        if mesh.tags.contains(&Tag::Minus) && !mesh.interface_fitted {
            return Err(Error::InvalidInput("mesh is not fitted to the interface".into()));
        }
        let n = mesh.n_vertices();
        let locals: Vec<(Mat2, [[f64; 3]; 3], [f64; 3])> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| local_system(mesh, medium, self.source, t))
            .collect();

        let dirichlet_mask = mesh.domain.dirichlet_mask();
        let mut unknown = vec![usize::MAX; n];
        let mut fixed = vec![None; n];
        let mut n_free = 0;
        for v in 0..n {
            if mesh.markers[v] & dirichlet_mask != 0 {
                fixed[v] = Some(phi(mesh.vertices[v]));
            } else {
                unknown[v] = n_free;
                n_free += 1;
            }
        }
        if n_free == n && medium.lower_order.as_ref().is_none_or(|l| l.potential == 0.0) {
            return Err(Error::InvalidInput("no Dirichlet boundary: the problem is singular".into()));
        }
        let mut triplets = Vec::with_capacity(9 * mesh.n_triangles());
        let mut rhs = vec![0.0; n_free];
        for (t, (_, k, f)) in locals.iter().enumerate() {
            let tri = mesh.triangles[t];
            for i in 0..3 {
                let row = unknown[tri[i]];
                if row == usize::MAX {
                    continue;
                }
                rhs[row] += f[i];
                for j in 0..3 {
                    match fixed[tri[j]] {
                        Some(g) => rhs[row] -= k[i][j] * g,
                        None => triplets.push((row, unknown[tri[j]], k[i][j])),
                    }
                }
            }
        }
        let matrix = CsrMatrix::from_triplets(n_free, triplets);
        let (free, stats) = solve(&matrix, &rhs, &self.options)?;

        let values: Vec<f64> = (0..n).map(|v| fixed[v].unwrap_or_else(|| free[unknown[v]])).collect();
        let gradients = (0..mesh.n_triangles())
            .map(|t| {
                let (g, _) = basis_gradients(mesh.corners(t));
                let tri = mesh.triangles[t];
                let u = [values[tri[0]], values[tri[1]], values[tri[2]]];
                [
                    u[0] * g[0][0] + u[1] * g[1][0] + u[2] * g[2][0],
                    u[0] * g[0][1] + u[1] * g[1][1] + u[2] * g[2][1],
                ]
            })
            .collect();
        let dirichlet = (0..n).filter_map(|v| fixed[v].map(|g| (v, g))).collect();
        Ok(DiscreteSolution {
            mesh: Arc::clone(mesh),
            values,
            gradients,
            coefficients: locals.into_iter().map(|(a, _, _)| a).collect(),
            medium_fingerprint: medium.fingerprint(),
            dirichlet,
            stats,
        })
    }
}

/// Element matrix of `-(div(A∇·) + W·∇ + V)` in weak form and the load
/// vector of `-f`.
fn local_system(mesh: &Mesh, medium: &Medium, source: Option<Source<'_>>, t: usize) -> (Mat2, [[f64; 3]; 3], [f64; 3]) {
    let corners = mesh.corners(t);
    let a = medium.element_coefficient(mesh.tags[t], corners);
    let (g, area) = basis_gradients(corners);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * a.bilinear(g[i], g[j]);
        }
    }
    if let Some(l) = &medium.lower_order {
        for i in 0..3 {
            for j in 0..3 {
                let mass = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                k[i][j] -= dot(l.drift, g[j]) * area / 3.0 + l.potential * mass;
            }
        }
    }
    let mut f = [0.0; 3];
    if let Some(src) = source {
        for w in GAUSS3 {
            let value = src(barycentric_point(corners, w));
            for i in 0..3 {
                f[i] -= area / 3.0 * value * w[i];
            }
        }
    }
    (a, k, f)
}

/// Solves `div(A∇u) + W·∇u + Vu = 0` with `u = phi` on the Dirichlet sides.
pub fn solve_dirichlet(
    c: &PiecewiseCoefficient,
    lower_order: Option<&LowerOrderTerms>,
    inclusion: Option<&InclusionScenario>,
    mesh: Arc<Mesh>,
    phi: &(dyn Fn(Vec2) -> f64 + Sync),
) -> Result<DiscreteSolution> {
    let medium = Medium {
        coefficient: c.clone(),
        inclusion: inclusion.cloned(),
        lower_order: lower_order.cloned(),
    };
    Problem::new(mesh, &medium).solve(phi)
}

impl DiscreteSolution {
    pub fn gradient_field(&self) -> &[Vec2] {
        &self.gradients
    }

    /// The solution for boundary data `c · φ`; the problem is linear and
    /// homogeneous, so no solve is needed.
    pub fn scaled(&self, c: f64) -> DiscreteSolution {
        DiscreteSolution {
            values: self.values.iter().map(|v| c * v).collect(),
            gradients: self.gradients.iter().map(|g| [c * g[0], c * g[1]]).collect(),
            dirichlet: self.dirichlet.iter().map(|&(i, v)| (i, c * v)).collect(),
            ..self.clone()
        }
    }

    /// Checks that this solution was computed for `medium`.
    pub fn check_medium(&self, medium: &Medium) -> Result<()> {
        if medium.fingerprint() == self.medium_fingerprint {
            Ok(())
        } else {
            Err(Error::CoefficientMismatch)
        }
    }

    /// Trace and conormal-flux jumps across the interface edges. The trace
    /// jump is identically zero for conforming elements; the flux jump is
    /// the pointwise elementwise residual.
    pub fn transmission_data(&self) -> TransmissionData {
        let mesh = &self.mesh;
        let mut data = TransmissionData::default();
        for v in 0..mesh.n_vertices() {
            if mesh.markers[v] & MARK_INTERFACE != 0 {
                data.h0.push(0.0);
            }
        }
        for e in mesh.tag_edges() {
            let (tp, tm) = match (mesh.tags[e.first], mesh.tags[e.second]) {
                (Tag::Minus, Tag::Minus) => continue,
                (Tag::Minus, _) => (e.second, e.first),
                (_, Tag::Minus) => (e.first, e.second),
                _ => continue,
            };
            let (a, b) = (mesh.vertices[e.a], mesh.vertices[e.b]);
            let len = crate::mat::dist(a, b);
            let tangent = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
            let mut nu = [tangent[1], -tangent[0]];
            // orient from the plus element into the minus element
            let cp = mesh.centroid(tp);
            if dot(nu, [cp[0] - a[0], cp[1] - a[1]]) > 0.0 {
                nu = [-nu[0], -nu[1]];
            }
            let fp = dot(self.coefficients[tp].mul_vec(self.gradients[tp]), nu);
            let fm = dot(self.coefficients[tm].mul_vec(self.gradients[tm]), nu);
            data.h1.push(fp - fm);
            data.edge_lengths.push(len);
        }
        data
    }

    /// `vertex,x,y,value` rows.
    pub fn nodal_csv(&self) -> String {
        let mut s = String::from("vertex,x,y,value\n");
        for (v, (p, u)) in self.mesh.vertices.iter().zip(&self.values).enumerate() {
            let _ = writeln!(s, "{v},{:e},{:e},{:e}", p[0], p[1], u);
        }
        s
    }

    /// `triangle,tag,ux,uy` rows.
    pub fn gradient_csv(&self) -> String {
        let mut s = String::from("triangle,tag,ux,uy\n");
        for (t, g) in self.gradients.iter().enumerate() {
            let tag = match self.mesh.tags[t] {
                Tag::Plus => "plus",
                Tag::Minus => "minus",
                Tag::Inclusion => "inclusion",
            };
            let _ = writeln!(s, "{t},{tag},{:e},{:e}", g[0], g[1]);
        }
        s
    }

    /// `‖u_h - exact‖_{L²}` with a 3-point rule per element.
    pub fn l2_error(&self, exact: impl Fn(Vec2) -> f64) -> f64 {
        let mesh = &self.mesh;
        (0..mesh.n_triangles())
            .map(|t| {
                let c = mesh.corners(t);
                let tri = mesh.triangles[t];
                let area = mesh.area(t);
                GAUSS3
                    .iter()
                    .map(|w| {
                        let uh: f64 = (0..3).map(|i| w[i] * self.values[tri[i]]).sum();
                        let e = uh - exact(barycentric_point(c, *w));
                        area / 3.0 * e * e
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest nodal deviation from `exact`.
    pub fn max_nodal_error(&self, exact: impl Fn(Vec2) -> f64) -> f64 {
        self.mesh
            .vertices
            .iter()
            .zip(&self.values)
            .map(|(&p, &u)| (u - exact(p)).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{InclusionCoefficient, JumpType, Rect, Shape};
    use crate::geometry::InterfaceGraph;
    use crate::solver::{build_mesh, Domain, RectSide};

    fn unit_mesh(h: f64) -> Arc<Mesh> {
        Arc::new(build_mesh(&Domain::dirichlet(Rect::unit()), None, None, h).unwrap())
    }

    #[test]
    fn linear_data_is_reproduced() {
        let c = PiecewiseCoefficient::isotropic(1.0, 1.0);
        let sol = solve_dirichlet(&c, None, None, unit_mesh(1.0 / 32.0), &|p| p[0]).unwrap();
        assert!(sol.max_nodal_error(|p| p[0]) <= 1e-10);
        for g in sol.gradient_field() {
            assert!((g[0] - 1.0).abs() < 1e-9 && g[1].abs() < 1e-9);
        }
        let sol = solve_dirichlet(&c, None, None, unit_mesh(1.0 / 16.0), &|_| 3.0).unwrap();
        assert!(sol.gradients.iter().all(|g| g[0].abs() < 1e-12 && g[1].abs() < 1e-12));
    }

    #[test]
    fn two_layer_series_solution() {
        let g = InterfaceGraph::flat([0.5, 0.5], 1.0);
        let d = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let mesh = Arc::new(build_mesh(&d, Some(&g), None, 1.0 / 16.0).unwrap());
        let c = PiecewiseCoefficient::isotropic(2.0, 1.0);
        let sol = solve_dirichlet(&c, None, None, mesh, &|p| p[1]).unwrap();
        // series conductances: slope 4/3 below, 2/3 above
        let exact = |p: Vec2| if p[1] <= 0.5 { 4.0 / 3.0 * p[1] } else { 2.0 / 3.0 + 2.0 / 3.0 * (p[1] - 0.5) };
        assert!(sol.max_nodal_error(exact) <= 1e-10);
        for (t, grad) in sol.gradients.iter().enumerate() {
            let want = if sol.mesh.tags[t] == Tag::Minus { 4.0 / 3.0 } else { 2.0 / 3.0 };
            assert!((grad[1] - want).abs() < 1e-9 && grad[0].abs() < 1e-9);
        }
        let jumps = sol.transmission_data();
        assert!(jumps.h1.iter().all(|j| j.abs() < 1e-9));
        assert_eq!(jumps.h0_max(), 0.0);
    }

    #[test]
    fn manufactured_solution_converges_at_second_order() {
        use std::f64::consts::PI;
        let exact = |p: Vec2| (PI * p[0]).sin() * (1.0 + p[1] * p[1]);
        // A = (1 + x/2 + y/4) I and f = div(A∇u)
        let f = |p: Vec2| {
            let (x, y) = (p[0], p[1]);
            let a = 1.0 + 0.5 * x + 0.25 * y;
            let ux = PI * (PI * x).cos() * (1.0 + y * y);
            let uy = 2.0 * y * (PI * x).sin();
            let lap = (PI * x).sin() * (2.0 - PI * PI * (1.0 + y * y));
            a * lap + 0.5 * ux + 0.25 * uy
        };
        let c = PiecewiseCoefficient::homogeneous(
            MatrixField::Affine {
                base: 1.0,
                gradient: [0.5, 0.25],
            },
            0.5,
            0.6,
        );
        let medium = Medium::new(c);
        let errors: Vec<f64> = [32.0, 64.0]
            .iter()
            .map(|n| {
                let sol = Problem::new(unit_mesh(1.0 / n), &medium).with_source(&f).solve(&exact).unwrap();
                sol.l2_error(exact)
            })
            .collect();
        let rate = (errors[0] / errors[1]).log2();
        assert!(rate >= 1.8, "rate {rate}, errors {errors:?}");
    }

    #[test]
    fn mismatched_medium_is_detected() {
        let c = PiecewiseCoefficient::isotropic(1.0, 1.0);
        let sol = solve_dirichlet(&c, None, None, unit_mesh(0.25), &|p| p[0]).unwrap();
        assert!(sol.check_medium(&Medium::new(c.clone())).is_ok());
        let other = PiecewiseCoefficient::isotropic(2.0, 2.0);
        assert!(matches!(sol.check_medium(&Medium::new(other)), Err(Error::CoefficientMismatch)));
    }

    #[test]
    fn series_strip_inclusion_matches_closed_form() {
        let s = InclusionScenario {
            shape: Shape::Polygon {
                vertices: vec![[0.0, 0.25], [1.0, 0.25], [1.0, 0.75], [0.0, 0.75]],
            },
            a_hat: InclusionCoefficient::Scaled { factor: 2.0 },
            eta: 0.5,
            zeta: 2.0,
            jump: JumpType::Raise,
            d1: None,
            h: None,
        };
        let d = Domain::with_natural(Rect::unit(), &[RectSide::Left, RectSide::Right]);
        let mesh = Arc::new(build_mesh(&d, None, Some(&s), 1.0 / 16.0).unwrap());
        let c = PiecewiseCoefficient::isotropic(1.0, 1.0);
        let sol = solve_dirichlet(&c, None, Some(&s), mesh, &|p| p[1]).unwrap();
        // resistances 0.25 + 0.25 + 0.25, current 4/3
        let exact = |p: Vec2| {
            let y = p[1];
            if y <= 0.25 {
                4.0 / 3.0 * y
            } else if y <= 0.75 {
                1.0 / 3.0 + 2.0 / 3.0 * (y - 0.25)
            } else {
                2.0 / 3.0 + 4.0 / 3.0 * (y - 0.75)
            }
        };
        assert!(sol.max_nodal_error(exact) <= 1e-10);
    }

    #[test]
    fn drift_terms_take_the_nonsymmetric_path() {
        let mut c = PiecewiseCoefficient::isotropic(1.0, 1.0);
        c.lambda0 = 0.5;
        let l = LowerOrderTerms {
            drift: [0.5, 0.0],
            potential: 0.0,
        };
        // u = x solves Δu + W·∇u = 0.5, so u = x is exact with f = 0.5
        let medium = Medium::new(c).with_lower_order(l);
        let src = |_: Vec2| 0.5;
        let sol = Problem::new(unit_mesh(1.0 / 16.0), &medium).with_source(&src).solve(&|p| p[0]).unwrap();
        assert_eq!(sol.stats.method, crate::solver::Method::BandedLu);
        assert!(sol.max_nodal_error(|p| p[0]) < 1e-10);
    }
}
