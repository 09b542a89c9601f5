//! Bounds on the inclusion size from one boundary power measurement.

mod calibration;
mod gap;

pub use calibration::{
    bound_size, calibrate_size, Exclusion, FamilyMember, LogFit, SizeBoundsResult, SizeCalibration, SizeMode,
    EROSION_RESOLUTION,
};
pub use gap::{
    boundary_data_ratio, default_alpha_prime, lower_bound_ingredients, measure_gap, BoundaryDataRatio, GapMeasurement,
    LowerBoundIngredients,
};
