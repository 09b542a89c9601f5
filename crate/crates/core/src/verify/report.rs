//! Verification reports and calibrate-on-fit / verify-on-holdout splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::extended;

/// Minimum ensemble size accepted by [`calibrate`].
pub const MIN_REPORTS: usize = 10;

pub const SUMMARY_HEADER: &str = "inequality,n_fit,n_holdout,fitted_constant,holdout_pass_rate,max_holdout_ratio";

/// Where a report came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mesh_h: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(mesh_h: f64) -> Self {
        Provenance {
            mesh_h,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// One inequality evaluated on one solution: `ratio = lhs / (m1^κ₁ m3^κ₂)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub experiment: String,
    pub inequality: String,
    #[serde(with = "extended")]
    pub lhs: f64,
    #[serde(with = "extended")]
    pub m1: f64,
    #[serde(with = "extended")]
    pub m3: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    #[serde(with = "extended")]
    pub ratio: f64,
    /// Set once the report has been through [`calibrate`].
    pub fitted_constant: Option<f64>,
    pub pass: Option<bool>,
    /// `lhs > 0` while the denominator vanishes.
    pub violation_candidate: bool,
    pub provenance: Provenance,
}

/// `lhs / (m1^κ₁ m3^κ₂)`, zero when `lhs = 0` and infinite when the
/// denominator vanishes under a positive `lhs`.
pub fn interpolation_ratio(lhs: f64, m1: f64, m3: f64, kappa1: f64, kappa2: f64) -> f64 {
    if lhs == 0.0 {
        return 0.0;
    }
    let den = m1.powf(kappa1) * m3.powf(kappa2);
    if den == 0.0 {
        f64::INFINITY
    } else {
        lhs / den
    }
}

impl VerificationReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: impl Into<String>,
        inequality: impl Into<String>,
        lhs: f64,
        m1: f64,
        m3: f64,
        kappa1: f64,
        kappa2: f64,
        provenance: Provenance,
    ) -> Self {
        let ratio = interpolation_ratio(lhs, m1, m3, kappa1, kappa2);
        VerificationReport {
            experiment: experiment.into(),
            inequality: inequality.into(),
            lhs,
            m1,
            m3,
            kappa1,
            kappa2,
            ratio,
            fitted_constant: None,
            pass: None,
            violation_candidate: ratio.is_infinite(),
            provenance,
        }
    }

    /// Applies a calibrated constant. A zero left side always passes; a
    /// violation candidate never does.
    pub fn judge(&mut self, constant: f64, safety: f64) {
        self.fitted_constant = Some(constant);
        let pass = if self.lhs == 0.0 {
            true
        } else if self.violation_candidate {
            false
        } else {
            self.ratio <= constant * safety
        };
        self.pass = Some(pass);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSet {
    pub inequality: String,
    pub seed: u64,
    pub safety: f64,
    /// Largest ratio over the fit split.
    #[serde(with = "extended")]
    pub fitted_constant: f64,
    pub fit: Vec<VerificationReport>,
    pub holdout: Vec<VerificationReport>,
    pub holdout_pass_rate: f64,
    #[serde(with = "extended")]
    pub max_holdout_ratio: f64,
}

/// Splits `reports` into fit and holdout with a seeded shuffle of the
/// id-sorted ensemble, so the split depends only on the ids and the seed.
pub fn calibrate(
    mut reports: Vec<VerificationReport>,
    seed: u64,
    safety: f64,
    fit_fraction: f64,
) -> Result<CalibrationSet> {
    if reports.len() < MIN_REPORTS {
        return Err(Error::TooFewReports {
            got: reports.len(),
            need: MIN_REPORTS,
        });
    }
    if !(safety > 0.0 && safety.is_finite()) {
        return Err(Error::InvalidInput(format!("safety factor {safety} must be positive")));
    }
    if !(fit_fraction > 0.0 && fit_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("fit fraction {fit_fraction} must lie in (0, 1)")));
    }
    let inequality = reports[0].inequality.clone();
    if let Some(other) = reports.iter().find(|r| r.inequality != inequality) {
        return Err(Error::InvalidInput(format!(
            "mixed ensemble: {} and {}",
            inequality, other.inequality
        )));
    }
    reports.sort_by(|a, b| a.experiment.cmp(&b.experiment));
    if reports.windows(2).any(|w| w[0].experiment == w[1].experiment) {
        return Err(Error::InvalidInput("duplicate experiment ids in ensemble".into()));
    }
    let n = reports.len();
    let n_fit = ((n as f64 * fit_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (fit_idx, hold_idx) = order.split_at(n_fit);
    let mut fit_idx = fit_idx.to_vec();
    let mut hold_idx = hold_idx.to_vec();
    fit_idx.sort_unstable();
    hold_idx.sort_unstable();

    let fitted_constant = fit_idx.iter().map(|&i| reports[i].ratio).fold(0.0, f64::max);
    let take = |idx: &[usize]| -> Vec<VerificationReport> {
        idx.iter()
            .map(|&i| {
                let mut r = reports[i].clone();
                r.judge(fitted_constant, safety);
                r
            })
            .collect()
    };
    let fit = take(&fit_idx);
    let holdout = take(&hold_idx);
    let passed = holdout.iter().filter(|r| r.pass == Some(true)).count();
    let max_holdout_ratio = holdout.iter().map(|r| r.ratio).fold(0.0, f64::max);
    Ok(CalibrationSet {
        inequality,
        seed,
        safety,
        fitted_constant,
        holdout_pass_rate: passed as f64 / holdout.len() as f64,
        max_holdout_ratio,
        fit,
        holdout,
    })
}

impl CalibrationSet {
    pub fn failing_ids(&self) -> Vec<&str> {
        self.holdout
            .iter()
            .filter(|r| r.pass != Some(true))
            .map(|r| r.experiment.as_str())
            .collect()
    }

    /// All reports, fit first, each carrying the calibrated verdict.
    pub fn reports(&self) -> impl Iterator<Item = &VerificationReport> {
        self.fit.iter().chain(&self.holdout)
    }

    /// One row under [`SUMMARY_HEADER`].
    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{:.16e},{:.16e},{:.16e}",
            self.inequality,
            self.fit.len(),
            self.holdout.len(),
            self.fitted_constant,
            self.holdout_pass_rate,
            self.max_holdout_ratio
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(id: usize, ratio: f64) -> VerificationReport {
        VerificationReport::new(format!("e{id:02}"), "test", ratio, 1.0, 1.0, 0.5, 0.5, Provenance::new(0.1))
    }

    #[test]
    fn ratio_conventions() {
        assert_eq!(interpolation_ratio(0.0, 0.0, 1.0, 0.2, 0.8), 0.0);
        assert_eq!(interpolation_ratio(1.0, 0.0, 1.0, 0.2, 0.8), f64::INFINITY);
        let r = VerificationReport::new("a", "t", 1.0, 0.0, 2.0, 0.2, 0.8, Provenance::new(0.1));
        assert!(r.violation_candidate);
        let mut z = VerificationReport::new("b", "t", 0.0, 0.0, 0.0, 0.2, 0.8, Provenance::new(0.1));
        z.judge(0.0, 2.0);
        assert_eq!(z.pass, Some(true));
    }

    #[test]
    fn equal_ratios_all_pass() {
        let set = calibrate((0..12).map(|i| report(i, 0.7)).collect(), 3, 2.0, 0.5).unwrap();
        assert_eq!(set.holdout_pass_rate, 1.0);
        assert_eq!(set.fitted_constant, 0.7);
        assert_eq!(set.fit.len(), 6);
    }

    #[test]
    fn outlier_at_three_times_fails() {
        let reports: Vec<_> = (0..10).map(|i| report(i, 1.0)).collect();
        let set = calibrate(reports.clone(), 11, 2.0, 0.5).unwrap();
        // plant the outlier in a holdout slot
        let victim = set.holdout[0].experiment.clone();
        let mut reports = reports;
        for r in reports.iter_mut() {
            if r.experiment == victim {
                *r = report(r.experiment[1..].parse().unwrap(), 3.0);
            }
        }
        let set = calibrate(reports, 11, 2.0, 0.5).unwrap();
        assert_eq!(set.fitted_constant, 1.0);
        assert!(set.holdout_pass_rate < 1.0);
        assert_eq!(set.failing_ids(), vec![victim.as_str()]);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let reports: Vec<_> = (0..20).map(|i| report(i, i as f64)).collect();
        let a = calibrate(reports.clone(), 5, 2.0, 0.5).unwrap();
        let mut shuffled = reports;
        shuffled.reverse();
        let b = calibrate(shuffled, 5, 2.0, 0.5).unwrap();
        assert_eq!(a, b);
        for r in &a.fit {
            assert!(a.holdout.iter().all(|h| h.experiment != r.experiment));
        }
    }

    #[test]
    fn too_few_reports() {
        let err = calibrate((0..9).map(|i| report(i, 1.0)).collect(), 1, 2.0, 0.5).unwrap_err();
        assert!(matches!(err, Error::TooFewReports { got: 9, need: 10 }));
    }
}
