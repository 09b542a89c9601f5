//! Coefficient fields, inclusion scenarios and transmission data.

mod coefficient;
mod inclusion;
mod lower_order;
mod transmission;

pub use coefficient::{
    validate_coefficient, CoefficientValidation, CoefficientViolation, MatrixField, PiecewiseCoefficient, Rect,
};
pub use inclusion::{
    distance_to_graph, distance_to_plus_boundary, eroded_area, validate_inclusion, InclusionCoefficient,
    InclusionContext, InclusionScenario, InclusionValidation, JumpType, Shape,
};
pub use lower_order::LowerOrderTerms;
pub use transmission::TransmissionData;
