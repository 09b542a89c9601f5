//! Discrete `H^{1/2}` seminorm of sampled traces.

use rayon::prelude::*;

use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 8;

/// `Σ_{i≠j} |f_i - f_j|² / |s_i - s_j|² · h_b²` for samples spaced `h_b`
/// apart on an open arc. This is the square of the seminorm.
pub fn h_half_seminorm(f: &[f64], spacing: f64) -> Result<f64> {
    double_sum(f, spacing, |d| d)
}

/// Same as [`h_half_seminorm`] on a closed curve of length `n · spacing`,
/// with distances measured along the shorter arc.
pub fn h_half_seminorm_periodic(f: &[f64], spacing: f64) -> Result<f64> {
    let n = f.len();
    double_sum(f, spacing, move |d| d.min(n - d))
}

fn double_sum(f: &[f64], spacing: f64, steps: impl Fn(usize) -> usize + Sync) -> Result<f64> {
    if f.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            got: f.len(),
            need: MIN_SAMPLES,
        });
    }
    if !(spacing > 0.0) {
        return Err(Error::InvalidInput(format!("sample spacing {spacing} must be positive")));
    }
    let rows: Vec<f64> = (0..f.len())
        .into_par_iter()
        .map(|i| {
            f.iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, fj)| {
                    let k = steps(i.abs_diff(j)) as f64;
                    (f[i] - fj).powi(2) / (k * k)
                })
                .sum::<f64>()
        })
        .collect();
    // the h_b² of the double integral cancels the 1/h_b² of the distances
    Ok(rows.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize) -> (Vec<f64>, f64) {
        let h = 1.0 / n as f64;
        ((0..=n).map(|i| i as f64 * h).collect(), h)
    }

    #[test]
    fn constant_is_zero() {
        assert_eq!(h_half_seminorm(&[3.0; 20], 0.1).unwrap(), 0.0);
    }

    #[test]
    fn linear_trace_is_resolution_stable() {
        let (f, h) = samples(64);
        let a = h_half_seminorm(&f, h).unwrap();
        let (f, h) = samples(128);
        let b = h_half_seminorm(&f, h).unwrap();
        assert!(a > 0.0);
        assert!((a - b).abs() / b < 0.05);
        // continuum value of ∫∫ |s - t|² / |s - t|² is 1
        assert!((b - 1.0).abs() < 0.02);
    }

    #[test]
    fn homogeneity_and_shift() {
        let f: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin()).collect();
        let a = h_half_seminorm(&f, 0.05).unwrap();
        let doubled: Vec<f64> = f.iter().map(|x| 2.0 * x).collect();
        assert_eq!(h_half_seminorm(&doubled, 0.05).unwrap(), 4.0 * a);
        let shifted: Vec<f64> = f.iter().map(|x| x + 0.5).collect();
        assert!((h_half_seminorm(&shifted, 0.05).unwrap() - a).abs() < 1e-12 * a);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(h_half_seminorm(&[1.0; 7], 0.1), Err(Error::TooFewSamples { got: 7, .. })));
    }

    #[test]
    fn periodic_uses_shorter_arc() {
        let n = 64;
        let f: Vec<f64> = (0..n).map(|i| (std::f64::consts::TAU * i as f64 / n as f64).cos()).collect();
        let open = h_half_seminorm(&f, 1.0 / n as f64).unwrap();
        let closed = h_half_seminorm_periodic(&f, 1.0 / n as f64).unwrap();
        assert!(closed > open);
    }
}
