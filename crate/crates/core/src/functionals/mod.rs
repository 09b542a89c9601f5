//! Region integrals, powers and seminorms entering the inequalities.

mod boundary;
mod ledger;
mod power;
mod region;
mod seminorm;

pub use boundary::{perimeter_arclength, perimeter_point, BoundaryTrace, TraceNorms};
pub use ledger::{FunctionalLedger, LedgerRow, LEDGER_HEADER};
pub use power::{
    check_gap_sign, energy_lemma_check, power, power_report, summarize_energy_lemma, EnergyLemmaRecord,
    EnergyLemmaSummary, PowerReport, PowerValue,
};
pub use region::{energy, region_integral, region_integral_within, region_integrals, Integrand, Region, RegionIntegral, RegionIntegralSet};
pub use seminorm::{h_half_seminorm, h_half_seminorm_periodic};
