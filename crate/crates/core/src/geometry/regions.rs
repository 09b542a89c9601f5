//! The three nested regions used by the interpolation inequality across the
//! interface. All predicates work in flattened coordinates where the
//! interface is `y = 0`.

use serde::Serialize;

use super::weight::{level_z, WeightParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RegionId {
    U1,
    U2,
    U3,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionTriple {
    pub r1: f64,
    pub r2: f64,
    /// `alpha_plus / delta`.
    pub a: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Lower cutoff selecting the branch of `{z >= c}` that contains the
    /// origin: below `-alpha_minus delta / beta` the level `z` turns around
    /// and grows again.
    pub y_floor: f64,
    pub warnings: Vec<String>,
    params: WeightParams,
}

/// Interpolation exponents `(R2, 2R1 + 2R2) / (2R1 + 3R2)`.
pub fn exponents(r1: f64, r2: f64) -> (f64, f64) {
    let den = 2.0 * r1 + 3.0 * r2;
    let k1 = r2 / den;
    (k1, 1.0 - k1)
}

pub fn make_regions(p: &WeightParams, r1: f64, r2: f64) -> Result<RegionTriple> {
    for (name, v) in [("R1", r1), ("R2", r2)] {
        if !(v > 0.0 && v <= p.big_r) {
            return Err(Error::Inadmissible(format!(
                "0 < {name} <= R violated: {name} = {v}, R = {}",
                p.big_r
            )));
        }
    }
    let mut warnings = Vec::new();
    if r1 >= r2 {
        warnings.push(format!(
            "R1 = {r1} >= R2 = {r2}: admissible for the inequality as stated, outside the ordering R1 < R2 used in its derivation"
        ));
    }
    let (kappa1, kappa2) = exponents(r1, r2);
    Ok(RegionTriple {
        r1,
        r2,
        a: p.alpha_plus / p.delta,
        kappa1,
        kappa2,
        y_floor: -p.alpha_minus * p.delta / p.beta,
        warnings,
        params: p.clone(),
    })
}

impl RegionTriple {
    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    pub fn z(&self, x: &[f64], y: f64) -> f64 {
        level_z(&self.params, x, y)
    }

    /// `R1 / (8a)`: the horizontal line separating `U1` from `U2`.
    pub fn split_height(&self) -> f64 {
        self.r1 / (8.0 * self.a)
    }

    /// `R1 / a`: top of `U1` and `U3`.
    pub fn top(&self) -> f64 {
        self.r1 / self.a
    }

    pub fn in_u1(&self, x: &[f64], y: f64) -> bool {
        y > self.y_floor
            && y > self.split_height()
            && y < self.top()
            && self.z(x, y) >= -4.0 * self.r2
    }

    pub fn in_u2(&self, x: &[f64], y: f64) -> bool {
        if !(y > self.y_floor && y < self.split_height()) {
            return false;
        }
        let z = self.z(x, y);
        z >= -self.r2 && z <= self.r1 / (2.0 * self.a)
    }

    pub fn in_u3(&self, x: &[f64], y: f64) -> bool {
        y > self.y_floor && y < self.top() && self.z(x, y) >= -4.0 * self.r2
    }

    pub fn contains(&self, id: RegionId, x: &[f64], y: f64) -> bool {
        match id {
            RegionId::U1 => self.in_u1(x, y),
            RegionId::U2 => self.in_u2(x, y),
            RegionId::U3 => self.in_u3(x, y),
        }
    }

    /// Bounding box of `U3` as `(max |x|, y_min, y_max)` in flattened
    /// coordinates. `z` is increasing in `y` above the floor, so the widest
    /// section is at the top and the lowest point is on the axis `x = 0`.
    pub fn u3_extent(&self) -> (f64, f64, f64) {
        let p = &self.params;
        let d = p.delta;
        let c = -4.0 * self.r2;
        // alpha_minus y / d + beta y^2 / (2 d^2) = c on the branch y > y_floor
        let disc = p.alpha_minus * p.alpha_minus + 2.0 * p.beta * c;
        let y_min = if disc > 0.0 {
            (d / p.beta) * (-p.alpha_minus + disc.sqrt())
        } else {
            self.y_floor
        };
        let y_max = self.top();
        let zc = p.alpha_minus * y_max / d + p.beta * y_max * y_max / (2.0 * d * d) - c;
        let half_width = (2.0 * d * zc.max(0.0)).sqrt();
        (half_width, y_min, y_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::weight::WeightConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wide_params() -> WeightParams {
        let mut cfg = WeightConfig::new(4.2, 1.0, 0.1, 10.0);
        cfg.delta0 = 10.0;
        cfg.build().unwrap()
    }

    #[test]
    fn equal_radii_give_one_fifth() {
        let p = wide_params();
        let t = p.big_r / 2.0;
        let rt = make_regions(&p, t, t).unwrap();
        assert!((rt.kappa1 - 0.2).abs() < 1e-15);
        assert!((rt.kappa2 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn small_r1_limit_is_one_third() {
        let (k1, k2) = exponents(1e-12, 1.0);
        assert!((k1 - 1.0 / 3.0).abs() < 1e-11);
        assert!((k2 - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn rejects_radii_outside_range() {
        let p = wide_params();
        let e = make_regions(&p, 2.0 * p.big_r, p.big_r / 2.0).unwrap_err();
        assert!(e.to_string().contains("R1"), "{e}");
        let e = make_regions(&p, p.big_r / 2.0, 0.0).unwrap_err();
        assert!(e.to_string().contains("R2"), "{e}");
    }

    #[test]
    fn warns_when_r1_not_below_r2() {
        let p = wide_params();
        assert_eq!(make_regions(&p, p.big_r, p.big_r / 8.0).unwrap().warnings.len(), 1);
        assert!(make_regions(&p, p.big_r / 8.0, p.big_r).unwrap().warnings.is_empty());
    }

    #[test]
    fn sampled_region_ordering() {
        let p = wide_params();
        let rt = make_regions(&p, p.big_r, p.big_r / 8.0).unwrap();
        let (w, y0, y1) = rt.u3_extent();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut n1, mut n2) = (0, 0);
        for _ in 0..200_000 {
            let x = rng.gen_range(-1.2 * w..1.2 * w);
            let y = rng.gen_range(y0 - 0.1..y1 + 0.1);
            let (a, b, c) = (rt.in_u1(&[x], y), rt.in_u2(&[x], y), rt.in_u3(&[x], y));
            assert!(!(a && b));
            if a {
                n1 += 1;
                assert!(c && y > rt.split_height());
            }
            if b {
                n2 += 1;
                assert!(c && y < rt.split_height());
            }
            if c {
                assert!(x.abs() <= w && y >= y0 && y <= y1);
            }
        }
        assert!(n1 > 100 && n2 > 100);
    }
}
