//! Ground-truth error metrics for derivative estimates.

use crate::error::{Error, Result};
use crate::series::mean;

/// Accuracy of a derivative estimate against a known derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub rmse: f64,
    /// Squared correlation between the estimation error and the truth.
    pub error_correlation: f64,
    /// Set when the correlation was undefined (constant truth or constant
    /// error) and reported as 0.
    pub correlation_degenerate: bool,
}

impl EvalMetrics {
    pub fn compute(estimate: &[f64], truth: &[f64]) -> Result<Self> {
        let rmse = rmse(estimate, truth)?;
        let corr = error_correlation(estimate, truth)?;
        Ok(Self {
            rmse,
            error_correlation: corr.value,
            correlation_degenerate: corr.degenerate,
        })
    }
}

/// Root of the mean squared difference.
pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("length mismatch ({} vs {})", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("rmse of empty sequences"));
    }
    Ok(rmse_unchecked(a, b))
}

pub(crate) fn rmse_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (ss / a.len() as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorCorrelation {
    pub value: f64,
    pub degenerate: bool,
}

/// Squared Pearson correlation between `estimate - truth` and `truth`.
///
/// Returns 0 with `degenerate = true` when either the truth or the error
/// has no variation, since the correlation is undefined there.
pub fn error_correlation(estimate: &[f64], truth: &[f64]) -> Result<ErrorCorrelation> {
    if estimate.len() != truth.len() {
        return Err(Error::invalid(format!(
            "length mismatch ({} vs {})",
            estimate.len(),
            truth.len()
        )));
    }
    if truth.len() < 3 {
        return Err(Error::invalid("error correlation needs at least 3 samples"));
    }
    let err: Vec<f64> = estimate.iter().zip(truth).map(|(e, t)| e - t).collect();
    Ok(squared_pearson(&err, truth))
}

pub(crate) fn squared_pearson(a: &[f64], b: &[f64]) -> ErrorCorrelation {
    let ma = mean(a);
    let mb = mean(b);
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let da = x - ma;
        let db = y - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    // Variation below round-off of the values themselves counts as constant.
    let tol_a = 1e-24 * a.iter().map(|v| v * v).sum::<f64>();
    let tol_b = 1e-24 * b.iter().map(|v| v * v).sum::<f64>();
    if saa <= tol_a || sbb <= tol_b {
        return ErrorCorrelation { value: 0.0, degenerate: true };
    }
    let r2 = (sab * sab) / (saa * sbb);
    ErrorCorrelation { value: r2.clamp(0.0, 1.0), degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(rmse(&[1.0; 4], &[0.0; 4]).unwrap(), 1.0);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn sine(m: usize) -> Vec<f64> {
        (0..m).map(|k| (0.05 * k as f64).sin()).collect()
    }

    #[test]
    fn constant_estimate_is_fully_correlated() {
        let truth = sine(200);
        let c = error_correlation(&vec![0.3; 200], &truth).unwrap();
        assert!(!c.degenerate);
        assert_abs_diff_eq!(c.value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn proportional_estimate_is_fully_correlated() {
        let truth = sine(100);
        let est: Vec<f64> = truth.iter().map(|t| 0.5 * t).collect();
        assert_abs_diff_eq!(error_correlation(&est, &truth).unwrap().value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn white_noise_error_is_uncorrelated() {
        let m = 10_000;
        let truth = sine(m);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let est: Vec<f64> = truth
            .iter()
            .map(|t| t + 0.3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        let c = error_correlation(&est, &truth).unwrap();

        // Direct Pearson formula on the error, computed independently.
        let err: Vec<f64> = est.iter().zip(&truth).map(|(e, t)| e - t).collect();
        let n = m as f64;
        let (se, st) = (err.iter().sum::<f64>(), truth.iter().sum::<f64>());
        let sxy: f64 = err.iter().zip(&truth).map(|(e, t)| e * t).sum();
        let sxx: f64 = err.iter().map(|e| e * e).sum();
        let syy: f64 = truth.iter().map(|t| t * t).sum();
        let r = (n * sxy - se * st) / ((n * sxx - se * se).sqrt() * (n * syy - st * st).sqrt());
        assert_abs_diff_eq!(c.value, r * r, epsilon = 1e-10);
        assert!(c.value < 0.01);
    }

    #[test]
    fn degenerate_cases_are_flagged() {
        let c = error_correlation(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.value, 0.0);
        let c = error_correlation(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap();
        assert!(c.degenerate);
        assert!(error_correlation(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
