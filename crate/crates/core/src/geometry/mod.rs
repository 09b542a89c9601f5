//! Carleman weights, the three-region construction and interface flattening.

mod interface;
mod regions;
mod weight;

pub use interface::{pull_back_regions, InterfaceGraph, InterfaceShape, PhysicalRegions};
pub use regions::{exponents, make_regions, RegionId, RegionTriple};
pub use weight::{admissible_r, level_z, weight_phi, Side, WeightConfig, WeightParams};
