use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Vec2;

/// Drift and potential terms `W · ∇u + V u`, taken constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerOrderTerms {
    pub drift: Vec2,
    pub potential: f64,
}

impl LowerOrderTerms {
    pub fn sup_norm(&self) -> f64 {
        self.drift[0].hypot(self.drift[1]) + self.potential.abs()
    }

    /// Enforces `‖W‖∞ + ‖V‖∞ ≤ λ₀⁻¹`.
    pub fn validate(&self, lambda0: f64) -> Result<()> {
        let s = self.sup_norm();
        if s > 1.0 / lambda0 {
            return Err(Error::InvalidInput(format!(
                "lower order terms too large: ‖W‖ + ‖V‖ = {s} > 1/lambda0 = {}",
                1.0 / lambda0
            )));
        }
        Ok(())
    }
}
