//! 2×2 matrices and 2-vectors used by the coefficient fields and assembly.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

pub type Vec2 = [f64; 2];

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn dist(a: Vec2, b: Vec2) -> f64 {
    norm([a[0] - b[0], a[1] - b[1]])
}

/// Row-major 2×2 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);

    pub fn scalar(s: f64) -> Self {
        Mat2([[s, 0.0], [0.0, s]])
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    /// `a · M b`
    pub fn bilinear(&self, a: Vec2, b: Vec2) -> f64 {
        dot(a, self.mul_vec(b))
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn is_symmetric(&self) -> bool {
        self.0[0][1] == self.0[1][0]
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn sym_eigenvalues(&self) -> (f64, f64) {
        let m = &self.0;
        let a = m[0][0];
        let d = m[1][1];
        let b = 0.5 * (m[0][1] + m[1][0]);
        let mean = 0.5 * (a + d);
        let half_diff = 0.5 * (a - d);
        let r = half_diff.hypot(b);
        (mean - r, mean + r)
    }

    /// Spectral norm of the symmetric part.
    pub fn sym_norm(&self) -> f64 {
        let (lo, hi) = self.sym_eigenvalues();
        lo.abs().max(hi.abs())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + o * -1.0
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        let a = self.0;
        Mat2([[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]])
    }
}
