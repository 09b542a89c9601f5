//! Graph interfaces `y = anchor_y + psi(x - anchor_x)` and the flattening map
//! `T(x, y) = (x, y - psi(x))` in coordinates local to the anchor.

use serde::{Deserialize, Serialize};

use super::regions::{RegionId, RegionTriple};
use crate::error::{Error, Result};
use crate::mat::Vec2;

/// Shape of `psi`; every variant satisfies `psi(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InterfaceShape {
    Flat,
    /// `curvature * x²`
    Parabola { curvature: f64 },
    /// `amplitude * sin(wavenumber * x)`
    Sine { amplitude: f64, wavenumber: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceGraph {
    pub shape: InterfaceShape,
    /// Point of the interface taken as the local origin.
    #[serde(default)]
    pub anchor: Vec2,
    /// Half-width of the patch on which `psi` is defined.
    pub patch_radius: f64,
    /// Bound on `‖psi‖_{C²}` over the patch.
    pub k0: f64,
    /// Required clearance between the interface and the outer boundary.
    pub d0: f64,
    /// Outer boundary regularity constants; stored for reporting only.
    #[serde(default = "one")]
    pub s0: f64,
    #[serde(default = "one")]
    pub l0: f64,
}

fn one() -> f64 {
    1.0
}

impl InterfaceGraph {
    pub fn flat(anchor: Vec2, patch_radius: f64) -> Self {
        InterfaceGraph {
            shape: InterfaceShape::Flat,
            anchor,
            patch_radius,
            k0: 1.0,
            d0: 0.0,
            s0: 1.0,
            l0: 1.0,
        }
    }

    pub fn with_shape(mut self, shape: InterfaceShape) -> Self {
        self.shape = shape;
        self
    }

    /// `(psi, psi', psi'')` at local abscissa `x`.
    pub fn psi_derivs(&self, x: f64) -> (f64, f64, f64) {
        match self.shape {
            InterfaceShape::Flat => (0.0, 0.0, 0.0),
            InterfaceShape::Parabola { curvature: c } => (c * x * x, 2.0 * c * x, 2.0 * c),
            InterfaceShape::Sine { amplitude: a, wavenumber: k } => {
                let (s, co) = (k * x).sin_cos();
                (a * s, a * k * co, -a * k * k * s)
            }
        }
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.psi_derivs(x).0
    }

    /// Physical height of the interface above physical abscissa `x`.
    pub fn height_at(&self, x: f64) -> f64 {
        self.anchor[1] + self.psi(x - self.anchor[0])
    }

    /// Signed vertical offset of a physical point from the interface;
    /// positive on the plus side.
    pub fn side_offset(&self, p: Vec2) -> f64 {
        p[1] - self.height_at(p[0])
    }

    /// Physical point to flattened local coordinates.
    pub fn flatten(&self, p: Vec2) -> Result<Vec2> {
        let x = p[0] - self.anchor[0];
        if x.abs() > self.patch_radius {
            return Err(Error::OutsidePatch {
                x: p[0],
                y: p[1],
                radius: self.patch_radius,
            });
        }
        Ok([x, p[1] - self.anchor[1] - self.psi(x)])
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(&self, q: Vec2) -> Result<Vec2> {
        if q[0].abs() > self.patch_radius {
            return Err(Error::OutsidePatch {
                x: q[0],
                y: q[1],
                radius: self.patch_radius,
            });
        }
        Ok([q[0] + self.anchor[0], q[1] + self.psi(q[0]) + self.anchor[1]])
    }

    /// Sampled `max(|psi|, |psi'|, |psi''|)` over the patch.
    pub fn sampled_c2_norm(&self, samples: usize) -> f64 {
        let n = samples.max(2);
        (0..n)
            .map(|i| {
                let x = -self.patch_radius + 2.0 * self.patch_radius * i as f64 / (n - 1) as f64;
                let (v, d1, d2) = self.psi_derivs(x);
                v.abs().max(d1.abs()).max(d2.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Checks `psi(0) = 0` and the sampled C² bound; returns the sampled norm.
    pub fn validate(&self) -> Result<f64> {
        if !(self.patch_radius > 0.0) {
            return Err(Error::InvalidInput("interface patch radius must be positive".into()));
        }
        let at0 = self.psi(0.0);
        if at0 != 0.0 {
            return Err(Error::InvalidInput(format!("psi(0) = {at0}, expected 0")));
        }
        let c2 = self.sampled_c2_norm(4001);
        if c2 > self.k0 {
            return Err(Error::InvalidInput(format!(
                "sampled C2 norm of psi {c2} exceeds K0 = {}",
                self.k0
            )));
        }
        Ok(c2)
    }
}

/// Regions pulled back to physical coordinates, `Ũj = T⁻¹(Uj)`.
#[derive(Clone, Debug)]
pub struct PhysicalRegions {
    pub interface: InterfaceGraph,
    pub regions: RegionTriple,
}

pub fn pull_back_regions(interface: &InterfaceGraph, rt: &RegionTriple) -> Result<PhysicalRegions> {
    let (w, _, _) = rt.u3_extent();
    if w > interface.patch_radius {
        return Err(Error::RegionOutsideDomain(format!(
            "U3 half-width {w} exceeds the interface patch radius {}",
            interface.patch_radius
        )));
    }
    Ok(PhysicalRegions {
        interface: interface.clone(),
        regions: rt.clone(),
    })
}

impl PhysicalRegions {
    /// Membership of a physical point; points outside the patch belong to
    /// no region.
    pub fn contains(&self, id: RegionId, p: Vec2) -> bool {
        match self.interface.flatten(p) {
            Ok(q) => self.regions.contains(id, &q[..1], q[1]),
            Err(_) => false,
        }
    }

    /// Physical points sampled along the boundary of the flattened `U3`
    /// bounding box.
    pub fn u3_hull_samples(&self, per_side: usize) -> Result<Vec<Vec2>> {
        let (w, y0, y1) = self.regions.u3_extent();
        let n = per_side.max(2);
        let mut out = Vec::with_capacity(4 * n);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let x = -w + 2.0 * w * t;
            let y = y0 + (y1 - y0) * t;
            for q in [[x, y0], [x, y1], [-w, y], [w, y]] {
                out.push(self.interface.unflatten(q)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::regions::make_regions;
    use crate::geometry::weight::WeightConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parabola() -> InterfaceGraph {
        InterfaceGraph::flat([0.0, 0.0], 2.0).with_shape(InterfaceShape::Parabola { curvature: 0.25 })
    }

    #[test]
    fn flat_interface_is_identity() {
        let g = InterfaceGraph::flat([0.0, 0.0], 5.0);
        assert_eq!(g.flatten([0.3, -1.2]).unwrap(), [0.3, -1.2]);
    }

    #[test]
    fn parabola_example() {
        assert_eq!(parabola().flatten([1.0, 1.0]).unwrap(), [1.0, 0.75]);
    }

    #[test]
    fn round_trip_random_points() {
        let g = InterfaceGraph::flat([0.2, 0.5], 1.5).with_shape(InterfaceShape::Sine {
            amplitude: 0.1,
            wavenumber: 3.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let p = [rng.gen_range(-1.3..1.7), rng.gen_range(-1.0..2.0)];
            let q = g.unflatten(g.flatten(p).unwrap()).unwrap();
            assert!((q[0] - p[0]).abs() <= 1e-14 && (q[1] - p[1]).abs() <= 1e-14);
        }
    }

    #[test]
    fn outside_patch_rejected() {
        assert!(matches!(parabola().flatten([2.5, 0.0]), Err(Error::OutsidePatch { .. })));
    }

    #[test]
    fn interface_points_flatten_to_zero() {
        let g = parabola();
        for i in 0..41 {
            let x = -2.0 + 0.1 * i as f64;
            let q = g.flatten([x, g.height_at(x)]).unwrap();
            assert_eq!(q[1], 0.0);
            assert!(g.side_offset([x, g.height_at(x) + 1e-9]) > 0.0);
        }
    }

    #[test]
    fn validation_checks_c2_bound() {
        let mut g = parabola();
        g.k0 = 1.0;
        assert!((g.validate().unwrap() - 1.0).abs() < 1e-12);
        g.k0 = 0.9;
        assert!(g.validate().is_err());
    }

    fn regions() -> RegionTriple {
        let mut cfg = WeightConfig::new(4.2, 1.0, 0.1, 10.0);
        cfg.delta0 = 10.0;
        let p = cfg.build().unwrap();
        make_regions(&p, p.big_r, p.big_r / 8.0).unwrap()
    }

    #[test]
    fn flat_pull_back_matches_flattened_regions() {
        let rt = regions();
        let pr = pull_back_regions(&InterfaceGraph::flat([0.0, 0.0], 3.0), &rt).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-0.4..0.2)];
            for id in [RegionId::U1, RegionId::U2, RegionId::U3] {
                assert_eq!(pr.contains(id, p), rt.contains(id, &p[..1], p[1]));
            }
        }
    }

    #[test]
    fn pulled_back_u2_area_matches_flat_area() {
        // T preserves area, so Monte Carlo estimates of |Ũ2| and |U2| over a
        // common sampling window must agree.
        let rt = regions();
        let curved = InterfaceGraph::flat([0.0, 0.0], 3.0).with_shape(InterfaceShape::Sine {
            amplitude: 0.05,
            wavenumber: 2.0,
        });
        let pr = pull_back_regions(&curved, &rt).unwrap();
        let (w, y0, y1) = rt.u3_extent();
        let (xa, xb, ya, yb) = (-w - 0.05, w + 0.05, y0 - 0.1, y1 + 0.1);
        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let flat_hits = (0..n)
            .filter(|_| {
                let (x, y) = (rng.gen_range(xa..xb), rng.gen_range(ya..yb));
                rt.in_u2(&[x], y)
            })
            .count();
        // physical window enlarged by the interface amplitude
        let (pa, pb) = (ya - 0.05, yb + 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let curved_hits = (0..n)
            .filter(|_| {
                let (x, y) = (rng.gen_range(xa..xb), rng.gen_range(pa..pb));
                pr.contains(RegionId::U2, [x, y])
            })
            .count();
        let a_flat = (xb - xa) * (yb - ya) * flat_hits as f64 / n as f64;
        let a_curved = (xb - xa) * (pb - pa) * curved_hits as f64 / n as f64;
        assert!(((a_curved - a_flat) / a_flat).abs() < 0.01, "{a_flat} vs {a_curved}");
    }
}
