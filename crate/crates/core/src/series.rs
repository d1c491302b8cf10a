//! Sampled signals and derivative estimates.

use crate::error::{Error, Result};

/// Smallest series every differentiation method accepts.
pub const MIN_SERIES_LEN: usize = 4;

/// Uniformly sampled scalar measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    dt: f64,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if values.len() < MIN_SERIES_LEN {
            return Err(Error::invalid(format!(
                "series needs at least {MIN_SERIES_LEN} samples, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {k}")));
        }
        Ok(Self { values, dt })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Nyquist frequency `1 / (2 dt)`.
    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }

    /// Sample times starting at zero.
    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Population variance of the samples.
    pub fn variance(&self) -> f64 {
        variance(&self.values)
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Smoothed position together with its time derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeEstimate {
    pub x_hat: Vec<f64>,
    pub dxdt_hat: Vec<f64>,
}

impl DerivativeEstimate {
    pub fn new(x_hat: Vec<f64>, dxdt_hat: Vec<f64>) -> Result<Self> {
        if x_hat.len() != dxdt_hat.len() {
            return Err(Error::invalid(format!(
                "position and derivative lengths differ ({} vs {})",
                x_hat.len(),
                dxdt_hat.len()
            )));
        }
        if x_hat.iter().chain(&dxdt_hat).any(|v| !v.is_finite()) {
            return Err(Error::invalid("estimate contains non-finite values"));
        }
        Ok(Self { x_hat, dxdt_hat })
    }

    pub fn len(&self) -> usize {
        self.x_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_hat.is_empty()
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}
