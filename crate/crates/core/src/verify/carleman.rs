//! Desk-scale check of the weighted Carleman estimate on analytic test
//! pairs `u = H₊u₊ + H₋u₋` with the flat interface `y = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{LowerOrderTerms, MatrixField, PiecewiseCoefficient};
use crate::functionals::h_half_seminorm;
use crate::geometry::{Side, WeightParams};
use crate::mat::{Mat2, Vec2};

/// Value and derivatives up to second order at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, ..Default::default() }
    }

    pub fn mul(self, o: Jet) -> Jet {
        Jet {
            v: self.v * o.v,
            x: self.x * o.v + self.v * o.x,
            y: self.y * o.v + self.v * o.y,
            xx: self.xx * o.v + 2.0 * self.x * o.x + self.v * o.xx,
            xy: self.xy * o.v + self.x * o.y + self.y * o.x + self.v * o.xy,
            yy: self.yy * o.v + 2.0 * self.y * o.y + self.v * o.yy,
        }
    }

    pub fn scale(self, s: f64) -> Jet {
        Jet {
            v: s * self.v,
            x: s * self.x,
            y: s * self.y,
            xx: s * self.xx,
            xy: s * self.xy,
            yy: s * self.yy,
        }
    }

    fn grad(&self) -> Vec2 {
        [self.x, self.y]
    }
}

/// `(1 - s²)⁴` on `|s| < 1` with `s = t / half`, and its first two
/// derivatives in `t`.
fn bump_1d(t: f64, half: f64) -> (f64, f64, f64) {
    let s = t / half;
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let v = q.powi(4);
    let d1 = -8.0 * s * q.powi(3) / half;
    let d2 = (-8.0 * q.powi(3) + 48.0 * s * s * q * q) / (half * half);
    (v, d1, d2)
}

/// Elementary factors of a test profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Factor {
    /// `(1 - ((x-cx)/hx)²)⁴ (1 - ((y-cy)/hy)²)⁴` inside the box, 0 outside.
    Bump { center: Vec2, half: Vec2 },
    /// `exp(kx x + ky y)`
    Exp { k: Vec2 },
    /// `c0 + cx x + cy y`
    Affine { c0: f64, c: Vec2 },
    /// `cos(k x + phase)`
    CosX { k: f64, phase: f64 },
}

impl Factor {
    pub fn jet(&self, p: Vec2) -> Jet {
        match *self {
            Factor::Bump { center, half } => {
                let (a, ax, axx) = bump_1d(p[0] - center[0], half[0]);
                let (b, by, byy) = bump_1d(p[1] - center[1], half[1]);
                Jet {
                    v: a * b,
                    x: ax * b,
                    y: a * by,
                    xx: axx * b,
                    xy: ax * by,
                    yy: a * byy,
                }
            }
            Factor::Exp { k } => {
                let e = (k[0] * p[0] + k[1] * p[1]).exp();
                Jet {
                    v: e,
                    x: k[0] * e,
                    y: k[1] * e,
                    xx: k[0] * k[0] * e,
                    xy: k[0] * k[1] * e,
                    yy: k[1] * k[1] * e,
                }
            }
            Factor::Affine { c0, c } => Jet {
                v: c0 + c[0] * p[0] + c[1] * p[1],
                x: c[0],
                y: c[1],
                ..Default::default()
            },
            Factor::CosX { k, phase } => {
                let (s, co) = (k * p[0] + phase).sin_cos();
                Jet {
                    v: co,
                    x: -k * s,
                    xx: -k * k * co,
                    ..Default::default()
                }
            }
        }
    }
}

/// `scale · Π factors`; an empty product is the constant `scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Profile {
    pub scale: f64,
    pub factors: Vec<Factor>,
}

impl Profile {
    pub fn zero() -> Self {
        Profile {
            scale: 0.0,
            factors: Vec::new(),
        }
    }

    pub fn jet(&self, p: Vec2) -> Jet {
        self.factors
            .iter()
            .fold(Jet::constant(1.0), |j, f| j.mul(f.jet(p)))
            .scale(self.scale)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestPair {
    pub name: String,
    pub plus: Profile,
    pub minus: Profile,
}

impl TestPair {
    pub fn side_jet(&self, side: Side, p: Vec2) -> Jet {
        match side {
            Side::Plus => self.plus.jet(p),
            Side::Minus => self.minus.jet(p),
        }
    }

    /// `u` itself: `u₊` on `y ≥ 0`, `u₋` below.
    pub fn value(&self, p: Vec2) -> f64 {
        self.side_jet(Side::of(p[1]), p).v
    }
}

/// Half-widths of the support box `B_{δ/2} × [-δ r0, δ r0]`.
pub fn support_box(p: &WeightParams) -> Vec2 {
    [0.5 * p.delta, p.delta * p.r0]
}

/// Five pairs supported well inside the box: a common bump (trace jump
/// zero, flux jump from the coefficient jump), the same bump times `e^y`,
/// a pair with a trace jump, an oscillating bump and an off-centre pair
/// with different normal slopes.
pub fn standard_pairs(p: &WeightParams) -> Vec<TestPair> {
    let [bx, by] = support_box(p);
    let bump = |center: Vec2, half: Vec2| Factor::Bump { center, half };
    // off the axis so that the normal derivative, and with it the flux
    // jump, does not vanish on the interface
    let base = bump([0.0, 0.05 * by], [0.9 * bx, 0.85 * by]);
    let single = |f: Vec<Factor>| Profile { scale: 1.0, factors: f };
    vec![
        TestPair {
            name: "common_bump".into(),
            plus: single(vec![base.clone()]),
            minus: single(vec![base.clone()]),
        },
        TestPair {
            name: "bump_exp_y".into(),
            plus: single(vec![base.clone(), Factor::Exp { k: [0.0, 1.0] }]),
            minus: single(vec![base.clone(), Factor::Exp { k: [0.0, 1.0] }]),
        },
        TestPair {
            name: "trace_jump".into(),
            plus: single(vec![
                base.clone(),
                Factor::Affine {
                    c0: 1.0,
                    c: [1.0 / p.delta, 0.0],
                },
            ]),
            minus: Profile {
                scale: 0.5,
                factors: vec![base.clone()],
            },
        },
        TestPair {
            name: "oscillating".into(),
            plus: single(vec![
                base.clone(),
                Factor::CosX {
                    k: 6.0 * std::f64::consts::PI / p.delta,
                    phase: 0.3,
                },
            ]),
            minus: single(vec![
                base.clone(),
                Factor::CosX {
                    k: 6.0 * std::f64::consts::PI / p.delta,
                    phase: 0.3,
                },
            ]),
        },
        TestPair {
            name: "offset_slopes".into(),
            plus: single(vec![
                bump([0.25 * bx, 0.0], [0.6 * bx, 0.7 * by]),
                Factor::Affine {
                    c0: 1.0,
                    c: [0.0, 1.0 / p.delta],
                },
            ]),
            minus: single(vec![
                bump([0.25 * bx, 0.0], [0.6 * bx, 0.7 * by]),
                Factor::Affine {
                    c0: 1.0,
                    c: [0.0, 2.0 / p.delta],
                },
            ]),
        },
    ]
}

/// Checks `|u| ≤ 1e-12` on a grid covering twice the support box, outside
/// the box.
pub fn check_support(pair: &TestPair, p: &WeightParams) -> Result<()> {
    let [bx, by] = support_box(p);
    let n = 200;
    for i in 0..=n {
        let x = -2.0 * bx + 4.0 * bx * i as f64 / n as f64;
        for j in 0..=n {
            let y = -2.0 * by + 4.0 * by * j as f64 / n as f64;
            if x.abs() <= bx && y.abs() <= by {
                continue;
            }
            let v = pair.value([x, y]);
            if v.abs() > 1e-12 {
                return Err(Error::SupportViolated { x, y, value: v.abs() });
            }
        }
    }
    Ok(())
}

/// `div(A∇u) + W·∇u + Vu` from a jet.
fn operator(a: &MatrixField, lower: Option<&LowerOrderTerms>, p: Vec2, j: &Jet) -> f64 {
    let m = a.eval(p).0;
    let d = a.divergence(p);
    let mut l = m[0][0] * j.xx + (m[0][1] + m[1][0]) * j.xy + m[1][1] * j.yy + d[0] * j.x + d[1] * j.y;
    if let Some(lo) = lower {
        l += lo.drift[0] * j.x + lo.drift[1] * j.y + lo.potential * j.v;
    }
    l
}

fn conormal(a: Mat2, j: &Jet) -> f64 {
    // A∇u · ν with ν = -e_y
    -a.mul_vec(j.grad())[1]
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

/// Composite 4-point Gauss nodes and weights on `[a, b]` with `cells`
/// cells.
fn gauss_line(a: f64, b: f64, cells: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / cells as f64;
    let mut out = Vec::with_capacity(4 * cells);
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * h;
        for (t, w) in GAUSS4 {
            out.push((mid + 0.5 * h * t, 0.5 * h * w));
        }
    }
    out
}

/// Per-point data of the volume integrals, independent of `τ`.
struct VolumePoint {
    weight: f64,
    phi: f64,
    u2: f64,
    grad2: f64,
    hess2: f64,
    op2: f64,
}

/// Trace data on the interface, independent of `τ`.
struct TracePoint {
    x: f64,
    phi: f64,
    plus: Jet,
    minus: Jet,
    h0: f64,
    h1: f64,
}

/// One point of the ratio curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanPoint {
    pub tau: f64,
    pub lhs_volume: f64,
    pub lhs_trace: f64,
    pub lhs_seminorm: f64,
    pub rhs_operator: f64,
    pub rhs_interface: f64,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(with = "crate::json::extended")]
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlemanCurve {
    pub pair: String,
    /// Quadrature cells per axis on each half of the box.
    pub resolution: usize,
    pub points: Vec<CarlemanPoint>,
    #[serde(with = "crate::json::extended")]
    pub max_ratio: f64,
}

/// Ratio of the left side of the Carleman estimate to the constant-free
/// right side at each `τ` of `taus`. The boundary terms use the weight
/// `e^{2τφ}` and the `H^{1/2}` seminorms are the discrete double sums over
/// the support interval of the interface.
pub fn carleman_ratio(
    pair: &TestPair,
    coefficient: &PiecewiseCoefficient,
    lower: Option<&LowerOrderTerms>,
    p: &WeightParams,
    taus: &[f64],
    resolution: usize,
) -> Result<CarlemanCurve> {
    if resolution < 4 {
        return Err(Error::InvalidInput(format!("quadrature resolution {resolution} is below 4")));
    }
    if let Some(t) = taus.iter().find(|&&t| !(t >= p.tau0)) {
        return Err(Error::InvalidInput(format!("tau = {t} is below tau0 = {}", p.tau0)));
    }
    check_support(pair, p)?;
    let [bx, by] = support_box(p);
    let xs = gauss_line(-bx, bx, resolution);

    let mut volume: Vec<VolumePoint> = Vec::new();
    for side in [Side::Plus, Side::Minus] {
        let (y0, y1) = match side {
            Side::Plus => (0.0, by),
            Side::Minus => (-by, 0.0),
        };
        let field = coefficient.field(side);
        for &(y, wy) in &gauss_line(y0, y1, resolution) {
            for &(x, wx) in &xs {
                let q = [x, y];
                let j = pair.side_jet(side, q);
                let op = operator(field, lower, q, &j);
                volume.push(VolumePoint {
                    weight: wx * wy,
                    phi: p.phi_branch(side, &[x], y),
                    u2: j.v * j.v,
                    grad2: j.x * j.x + j.y * j.y,
                    hess2: j.xx * j.xx + j.xy * j.xy + j.yy * j.yy,
                    op2: op * op,
                });
            }
        }
    }

    // interface: Gauss points for the L² traces, midpoints for the seminorms
    let trace_at = |x: f64| {
        let q = [x, 0.0];
        let plus = pair.plus.jet(q);
        let minus = pair.minus.jet(q);
        TracePoint {
            x,
            phi: p.phi_branch(Side::Plus, &[x], 0.0),
            plus,
            minus,
            h0: plus.v - minus.v,
            h1: conormal(coefficient.eval(Side::Plus, q), &plus) - conormal(coefficient.eval(Side::Minus, q), &minus),
        }
    };
    let gauss_trace: Vec<(f64, TracePoint)> = xs.iter().map(|&(x, w)| (w, trace_at(x))).collect();
    let n_samples = 8 * resolution;
    let spacing = 2.0 * bx / n_samples as f64;
    let samples: Vec<TracePoint> = (0..n_samples)
        .map(|k| trace_at(-bx + (k as f64 + 0.5) * spacing))
        .collect();

    let mut points = Vec::with_capacity(taus.len());
    for &tau in taus {
        let (mut vol, mut op) = (0.0, 0.0);
        for q in &volume {
            let w = q.weight * (2.0 * tau * q.phi).exp();
            vol += w * (tau.powi(3) * q.u2 + tau * q.grad2 + q.hess2 / tau);
            op += w * q.op2;
        }
        let (mut trace, mut jumps) = (0.0, 0.0);
        for (w, t) in &gauss_trace {
            let e = w * (2.0 * tau * t.phi).exp();
            for j in [&t.plus, &t.minus] {
                trace += e * (tau.powi(3) * j.v * j.v + tau * (j.x * j.x + j.y * j.y));
            }
            jumps += e * (tau.powi(3) * t.h0 * t.h0 + tau * t.h1 * t.h1);
        }
        let weighted = |f: &dyn Fn(&TracePoint) -> f64| -> Result<f64> {
            let v: Vec<f64> = samples.iter().map(|t| (tau * t.phi).exp() * f(t)).collect();
            h_half_seminorm(&v, spacing)
        };
        let mut semi = 0.0;
        for (side, slope) in [(Side::Plus, p.alpha_plus), (Side::Minus, p.alpha_minus)] {
            let pick = move |t: &TracePoint| match side {
                Side::Plus => t.plus,
                Side::Minus => t.minus,
            };
            let phi_y = slope / p.delta;
            semi += tau * tau * weighted(&|t| pick(t).v)?;
            // D(e^{τφ} u) = e^{τφ} (τ∇φ u + ∇u) with ∇φ = (-x/δ, α/δ) at y = 0
            semi += weighted(&|t| tau * (-t.x / p.delta) * pick(t).v + pick(t).x)?;
            semi += weighted(&|t| tau * phi_y * pick(t).v + pick(t).y)?;
        }
        let interface_semi = weighted(&|t| t.h1)? + weighted(&|t| tau * (-t.x / p.delta) * t.h0 + t.plus.x - t.minus.x)?;
        let lhs = vol + trace + semi;
        let rhs = op + interface_semi + jumps;
        let ratio = if lhs == 0.0 {
            0.0
        } else if rhs == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs
        };
        points.push(CarlemanPoint {
            tau,
            lhs_volume: vol,
            lhs_trace: trace,
            lhs_seminorm: semi,
            rhs_operator: op,
            rhs_interface: interface_semi + jumps,
            lhs,
            rhs,
            ratio,
        });
    }
    let max_ratio = points.iter().map(|q| q.ratio).fold(0.0, f64::max);
    Ok(CarlemanCurve {
        pair: pair.name.clone(),
        resolution,
        points,
        max_ratio,
    })
}
