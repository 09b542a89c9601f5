//! Matrix-valued conductivities and their structural validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Side;
use crate::mat::{Mat2, Vec2};

/// A symmetric matrix field `A(x, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixField {
    /// `value · I`
    Isotropic { value: f64 },
    /// A constant matrix, row major.
    Constant { matrix: [[f64; 2]; 2] },
    /// `(base + slope |x - x_ref|) · I`
    AbsX {
        base: f64,
        slope: f64,
        #[serde(default)]
        x_ref: f64,
    },
    /// `(base + gradient · p) · I`
    Affine { base: f64, gradient: Vec2 },
    /// `(base + amplitude sin(k x) sin(k y)) · I`
    SinProduct { base: f64, amplitude: f64, wavenumber: f64 },
}

impl MatrixField {
    pub fn eval(&self, p: Vec2) -> Mat2 {
        match *self {
            MatrixField::Isotropic { value } => Mat2::scalar(value),
            MatrixField::Constant { matrix } => Mat2(matrix),
            MatrixField::AbsX { base, slope, x_ref } => Mat2::scalar(base + slope * (p[0] - x_ref).abs()),
            MatrixField::Affine { base, gradient } => {
                Mat2::scalar(base + gradient[0] * p[0] + gradient[1] * p[1])
            }
            MatrixField::SinProduct {
                base,
                amplitude,
                wavenumber: k,
            } => Mat2::scalar(base + amplitude * (k * p[0]).sin() * (k * p[1]).sin()),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MatrixField::Isotropic { .. } | MatrixField::Constant { .. })
    }

    /// Divergence of the rows, `(Σ_i ∂_i a_i1, Σ_i ∂_i a_i2)`.
    pub fn divergence(&self, p: Vec2) -> Vec2 {
        match *self {
            MatrixField::Isotropic { .. } | MatrixField::Constant { .. } => [0.0, 0.0],
            MatrixField::Affine { gradient, .. } => gradient,
            MatrixField::AbsX { slope, x_ref, .. } => [slope * (p[0] - x_ref).signum(), 0.0],
            MatrixField::SinProduct {
                amplitude: a,
                wavenumber: k,
                ..
            } => [
                a * k * (k * p[0]).cos() * (k * p[1]).sin(),
                a * k * (k * p[0]).sin() * (k * p[1]).cos(),
            ],
        }
    }

    /// Scalar multiple of this field, used for inclusion contrasts.
    pub fn scaled(&self, s: f64) -> MatrixField {
        match self.clone() {
            MatrixField::Isotropic { value } => MatrixField::Isotropic { value: value * s },
            MatrixField::Constant { matrix } => MatrixField::Constant {
                matrix: (Mat2(matrix) * s).0,
            },
            MatrixField::AbsX { base, slope, x_ref } => MatrixField::AbsX {
                base: base * s,
                slope: slope * s,
                x_ref,
            },
            MatrixField::Affine { base, gradient } => MatrixField::Affine {
                base: base * s,
                gradient: [gradient[0] * s, gradient[1] * s],
            },
            MatrixField::SinProduct {
                base,
                amplitude,
                wavenumber,
            } => MatrixField::SinProduct {
                base: base * s,
                amplitude: amplitude * s,
                wavenumber,
            },
        }
    }
}

/// `A = H₊ A₊ + H₋ A₋` together with its declared structural constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseCoefficient {
    pub plus: MatrixField,
    pub minus: MatrixField,
    /// Ellipticity constant in `(0, 1]`.
    pub lambda0: f64,
    /// Lipschitz constant.
    pub m0: f64,
}

impl PiecewiseCoefficient {
    pub fn isotropic(plus: f64, minus: f64) -> Self {
        let lo = plus.min(minus).min(1.0 / plus.max(minus)).min(1.0);
        PiecewiseCoefficient {
            plus: MatrixField::Isotropic { value: plus },
            minus: MatrixField::Isotropic { value: minus },
            lambda0: lo,
            m0: 0.0,
        }
    }

    pub fn homogeneous(field: MatrixField, lambda0: f64, m0: f64) -> Self {
        PiecewiseCoefficient {
            plus: field.clone(),
            minus: field,
            lambda0,
            m0,
        }
    }

    pub fn field(&self, side: Side) -> &MatrixField {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }

    pub fn eval(&self, side: Side, p: Vec2) -> Mat2 {
        self.field(side).eval(p)
    }
}

/// Axis-aligned sampling window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }

    /// Distance from an interior point to the boundary.
    pub fn inner_distance(&self, p: Vec2) -> f64 {
        (p[0] - self.x0).min(self.x1 - p[0]).min(p[1] - self.y0).min(self.y1 - p[1])
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * (self.width() + self.height())
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec2 {
        [rng.gen_range(self.x0..=self.x1), rng.gen_range(self.y0..=self.y1)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CoefficientViolation {
    Asymmetric { side: Side, point: Vec2 },
    Ellipticity { side: Side, point: Vec2, eigenvalue: f64 },
    Lipschitz { side: Side, p: Vec2, q: Vec2, quotient: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientValidation {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max_eigenvalue / min_eigenvalue` over all samples.
    pub ellipticity_ratio: f64,
    /// Largest `|A(q) - A(p)| / (|Δx| + |Δy|)` observed.
    pub lipschitz_quotient: f64,
    pub passed: bool,
    /// First violating sample, in sampling order.
    pub first_violation: Option<CoefficientViolation>,
}

/// Samples both branches of the coefficient over `window` and checks
/// symmetry, the ellipticity bounds `λ₀ ≤ A ≤ λ₀⁻¹` and the Lipschitz bound.
pub fn validate_coefficient(
    c: &PiecewiseCoefficient,
    window: Rect,
    sample_count: usize,
    seed: u64,
) -> Result<CoefficientValidation> {
    if sample_count == 0 {
        return Err(Error::InvalidInput("sample_count must be at least 1".into()));
    }
    if !(c.lambda0 > 0.0 && c.lambda0 <= 1.0) {
        return Err(Error::InvalidInput(format!("lambda0 = {} not in (0, 1]", c.lambda0)));
    }
    let tol = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut lip = 0.0f64;
    let mut first = None;
    let diam = window.width().hypot(window.height());
    for _ in 0..sample_count {
        for side in [Side::Plus, Side::Minus] {
            let field = c.field(side);
            let p = window.sample(&mut rng);
            let a = field.eval(p);
            if !a.is_symmetric() && first.is_none() {
                first = Some(CoefficientViolation::Asymmetric { side, point: p });
            }
            let (lo, hi) = a.sym_eigenvalues();
            min_eig = min_eig.min(lo);
            max_eig = max_eig.max(hi);
            if first.is_none() {
                if lo < c.lambda0 * (1.0 - tol) {
                    first = Some(CoefficientViolation::Ellipticity { side, point: p, eigenvalue: lo });
                } else if hi > (1.0 + tol) / c.lambda0 {
                    first = Some(CoefficientViolation::Ellipticity { side, point: p, eigenvalue: hi });
                }
            }
            // pair partner at a log-uniform distance so both local and
            // global variation are probed
            let scale = diam * 10f64.powf(rng.gen_range(-4.0..0.0));
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let q = [
                (p[0] + scale * angle.cos()).clamp(window.x0, window.x1),
                (p[1] + scale * angle.sin()).clamp(window.y0, window.y1),
            ];
            let l1 = (q[0] - p[0]).abs() + (q[1] - p[1]).abs();
            if l1 > 0.0 {
                let quotient = (field.eval(q) - a).sym_norm() / l1;
                lip = lip.max(quotient);
                if first.is_none() && quotient > c.m0 * (1.0 + tol) + tol {
                    first = Some(CoefficientViolation::Lipschitz { side, p, q, quotient });
                }
            }
        }
    }
    Ok(CoefficientValidation {
        min_eigenvalue: min_eig,
        max_eigenvalue: max_eig,
        ellipticity_ratio: max_eig / min_eig,
        lipschitz_quotient: lip,
        passed: first.is_none(),
        first_violation: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_passes() {
        let c = PiecewiseCoefficient::homogeneous(MatrixField::Isotropic { value: 1.0 }, 1.0, 0.0);
        let v = validate_coefficient(&c, Rect::unit(), 10_000, 1).unwrap();
        assert!(v.passed);
        assert_eq!(v.ellipticity_ratio, 1.0);
        assert_eq!(v.lipschitz_quotient, 0.0);
    }

    #[test]
    fn constant_two_passes_with_lambda_point_four() {
        let c = PiecewiseCoefficient {
            plus: MatrixField::Isotropic { value: 2.0 },
            minus: MatrixField::Isotropic { value: 1.0 },
            lambda0: 0.4,
            m0: 0.0,
        };
        assert!(validate_coefficient(&c, Rect::unit(), 10_000, 2).unwrap().passed);
    }

    #[test]
    fn abs_x_field_fails_lipschitz_half() {
        // true Lipschitz constant of (1 + |x|) I is 1
        let field = MatrixField::AbsX {
            base: 1.0,
            slope: 1.0,
            x_ref: 0.0,
        };
        let c = PiecewiseCoefficient::homogeneous(field.clone(), 0.3, 0.5);
        let v = validate_coefficient(&c, Rect::new(-1.0, 1.0, -1.0, 1.0), 10_000, 3).unwrap();
        assert!(!v.passed);
        assert!(matches!(v.first_violation, Some(CoefficientViolation::Lipschitz { .. })));
        assert!(v.lipschitz_quotient > 0.9 && v.lipschitz_quotient <= 1.0 + 1e-12);

        let c = PiecewiseCoefficient::homogeneous(field, 0.3, 1.0);
        assert!(validate_coefficient(&c, Rect::new(-1.0, 1.0, -1.0, 1.0), 10_000, 3).unwrap().passed);
    }

    #[test]
    fn asymmetric_matrix_reported() {
        let c = PiecewiseCoefficient::homogeneous(
            MatrixField::Constant {
                matrix: [[1.0, 0.1], [0.0, 1.0]],
            },
            0.5,
            0.0,
        );
        let v = validate_coefficient(&c, Rect::unit(), 10, 0).unwrap();
        assert!(matches!(v.first_violation, Some(CoefficientViolation::Asymmetric { .. })));
    }

    #[test]
    fn ellipticity_violation_reported() {
        let c = PiecewiseCoefficient::isotropic(3.0, 1.0);
        let mut bad = c.clone();
        bad.lambda0 = 0.5;
        let v = validate_coefficient(&bad, Rect::unit(), 100, 0).unwrap();
        assert!(matches!(v.first_violation, Some(CoefficientViolation::Ellipticity { .. })));
        assert!(validate_coefficient(&c, Rect::unit(), 100, 0).unwrap().passed);
    }

    #[test]
    fn zero_samples_rejected() {
        let c = PiecewiseCoefficient::isotropic(1.0, 1.0);
        assert!(validate_coefficient(&c, Rect::unit(), 0, 0).is_err());
    }
}
