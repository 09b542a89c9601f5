//! Calibrate-and-verify harnesses for the interpolation inequalities.

mod balls;
mod carleman;
mod report;
mod three_region;

pub use balls::{
    ball_energy, boundary_data_proxy, center_grid, propagation_constant, three_sphere_check, BoundaryDataProxy,
    PropagationResult, DEFAULT_THETA, PROXY_ALPHA_PRIME,
};
pub use carleman::{
    carleman_ratio, check_support, standard_pairs, support_box, CarlemanCurve, CarlemanPoint, Factor, Jet, Profile,
    TestPair,
};
pub use report::{
    calibrate, interpolation_ratio, CalibrationSet, Provenance, VerificationReport, MIN_REPORTS, SUMMARY_HEADER,
};
pub use three_region::{inequality_name, three_region_check};
