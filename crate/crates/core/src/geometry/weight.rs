//! Piecewise-quadratic Carleman weight and the level coordinate `z`.
//!
//! The weight has slope `alpha_plus / delta` above the interface `y = 0` and
//! `alpha_minus / delta` below it. Both branches share the quadratic part
//! `beta y² / (2 delta²) - |x|² / (2 delta)`, so the weight is continuous
//! across `y = 0` while its normal derivative jumps by
//! `(alpha_plus - alpha_minus) / delta`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which half-space a point belongs to. `y >= 0` is `Plus`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn of(y: f64) -> Side {
        if y >= 0.0 {
            Side::Plus
        } else {
            Side::Minus
        }
    }
}

/// User-facing weight configuration. Constants the theory only asserts to
/// exist (`separation`, `delta0`, `r0`, `tau0`) default to fixed values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    #[serde(default = "defaults::beta")]
    pub beta: f64,
    pub delta: f64,
    #[serde(default = "defaults::separation")]
    pub separation: f64,
    #[serde(default = "defaults::r0")]
    pub r0: f64,
    #[serde(default = "defaults::delta0")]
    pub delta0: f64,
    #[serde(default = "defaults::tau0")]
    pub tau0: f64,
}

mod defaults {
    pub fn beta() -> f64 {
        1.0
    }
    pub fn separation() -> f64 {
        4.0
    }
    pub fn r0() -> f64 {
        1.0
    }
    pub fn delta0() -> f64 {
        1.0
    }
    pub fn tau0() -> f64 {
        1.0
    }
}

impl WeightConfig {
    pub fn new(alpha_plus: f64, alpha_minus: f64, beta: f64, delta: f64) -> Self {
        WeightConfig {
            alpha_plus,
            alpha_minus,
            beta,
            delta,
            separation: defaults::separation(),
            r0: defaults::r0(),
            delta0: defaults::delta0(),
            tau0: defaults::tau0(),
        }
    }

    pub fn build(&self) -> Result<WeightParams> {
        WeightParams::new(self.clone())
    }
}

/// Validated weight parameters together with the derived radii `r` and `R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightParams {
    pub alpha_plus: f64,
    pub alpha_minus: f64,
    pub beta: f64,
    pub delta: f64,
    pub separation: f64,
    pub r0: f64,
    pub delta0: f64,
    pub tau0: f64,
    /// Largest admissible `r`.
    pub r: f64,
    /// `alpha_minus * r / 16`.
    pub big_r: f64,
}

impl WeightParams {
    pub fn new(cfg: WeightConfig) -> Result<Self> {
        let WeightConfig {
            alpha_plus,
            alpha_minus,
            beta,
            delta,
            separation,
            r0,
            delta0,
            tau0,
        } = cfg;
        let named = [
            ("alpha_plus", alpha_plus),
            ("alpha_minus", alpha_minus),
            ("beta", beta),
            ("delta", delta),
            ("separation", separation),
            ("r0", r0),
            ("delta0", delta0),
            ("tau0", tau0),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Inadmissible(format!("{name} = {v} must be positive and finite")));
            }
        }
        if r0 > 1.0 {
            return Err(Error::Inadmissible(format!("r0 = {r0} must satisfy r0 <= 1")));
        }
        if alpha_plus <= separation * alpha_minus {
            return Err(Error::Inadmissible(format!(
                "alpha_plus > L * alpha_minus violated: {alpha_plus} <= {separation} * {alpha_minus}"
            )));
        }
        if delta > delta0 {
            return Err(Error::Inadmissible(format!("delta <= delta0 violated: {delta} > {delta0}")));
        }
        let r = admissible_r(alpha_minus, beta, delta, r0);
        let big_r = alpha_minus * r / 16.0;
        let bee = 13.0 * alpha_minus * alpha_minus / (128.0 * beta);
        if big_r > bee {
            return Err(Error::Inadmissible(format!(
                "R <= 13 alpha_minus^2 / (128 beta) violated: {big_r} > {bee}"
            )));
        }
        Ok(WeightParams {
            alpha_plus,
            alpha_minus,
            beta,
            delta,
            separation,
            r0,
            delta0,
            tau0,
            r,
            big_r,
        })
    }

    fn slope(&self, side: Side) -> f64 {
        match side {
            Side::Plus => self.alpha_plus,
            Side::Minus => self.alpha_minus,
        }
    }

    /// One branch of the weight, evaluated regardless of the sign of `y`.
    pub fn phi_branch(&self, side: Side, x: &[f64], y: f64) -> f64 {
        let d = self.delta;
        self.slope(side) * y / d + self.beta * y * y / (2.0 * d * d) - norm_sq(x) / (2.0 * d)
    }

    /// Gradient of one branch: `(∂x_1, ..., ∂x_{n-1}, ∂y)`.
    pub fn phi_branch_grad(&self, side: Side, x: &[f64], y: f64) -> Vec<f64> {
        let d = self.delta;
        let mut g: Vec<f64> = x.iter().map(|xi| -xi / d).collect();
        g.push(self.slope(side) / d + self.beta * y / (d * d));
        g
    }

    /// Hessian diagonal of one branch (the Hessian is diagonal).
    pub fn phi_hessian_diag(&self, dim_x: usize) -> Vec<f64> {
        let d = self.delta;
        let mut h = vec![-1.0 / d; dim_x];
        h.push(self.beta / (d * d));
        h
    }

    /// Jump of the normal derivative across `y = 0`.
    pub fn normal_derivative_jump(&self) -> f64 {
        (self.alpha_plus - self.alpha_minus) / self.delta
    }
}

/// `min(r0, 13 alpha_minus / (8 beta), 2 delta / (19 alpha_minus + 8 beta))`.
pub fn admissible_r(alpha_minus: f64, beta: f64, delta: f64, r0: f64) -> f64 {
    let a = 13.0 * alpha_minus / (8.0 * beta);
    let b = 2.0 * delta / (19.0 * alpha_minus + 8.0 * beta);
    r0.min(a).min(b)
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// The Carleman weight `phi_{delta,±}(x, y)`, branch selected by the sign of `y`.
pub fn weight_phi(p: &WeightParams, x: &[f64], y: f64) -> f64 {
    p.phi_branch(Side::of(y), x, y)
}

/// Level coordinate `z(x, y)`; equal to the lower weight branch for every `y`.
pub fn level_z(p: &WeightParams, x: &[f64], y: f64) -> f64 {
    p.phi_branch(Side::Minus, x, y)
}
