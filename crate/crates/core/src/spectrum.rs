//! One-sided periodogram and a deterministic cutoff-frequency rule.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Fraction of non-DC power below the cutoff frequency.
pub const DEFAULT_POWER_FRACTION: f64 = 0.95;

/// Periodogram at frequencies `k / (m dt)`, `k = 0..=m/2`.
///
/// Power is `c_k |X_k|^2 / m` where `X` is the DFT of the mean-removed
/// signal and `c_k = 2` for bins that have a mirror image (every bin except
/// DC and, for even `m`, Nyquist). With this scaling the non-DC bins sum to
/// `m * variance` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl PowerSpectrum {
    /// Total power excluding the DC bin.
    pub fn total_power(&self) -> f64 {
        self.power.iter().skip(1).sum()
    }

    /// Frequency spacing between bins.
    pub fn resolution(&self) -> f64 {
        self.frequencies[1] - self.frequencies[0]
    }

    /// Index of the strongest non-DC bin.
    pub fn peak_index(&self) -> usize {
        let mut best = 1;
        for k in 1..self.power.len() {
            if self.power[k] > self.power[best] {
                best = k;
            }
        }
        best
    }
}

pub const MIN_SPECTRUM_LEN: usize = 8;

pub fn power_spectrum(series: &TimeSeries) -> Result<PowerSpectrum> {
    let m = series.len();
    if m < MIN_SPECTRUM_LEN {
        return Err(Error::invalid(format!(
            "power spectrum needs at least {MIN_SPECTRUM_LEN} samples, got {m}"
        )));
    }
    let mean = series.mean();
    let scale = series.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let spread = series.values().iter().fold(0.0f64, |a, v| a.max((v - mean).abs()));
    // A constant series leaves only round-off after mean removal.
    let constant = spread <= 1e-12 * scale;

    let mut buf: Vec<Complex<f64>> = series
        .values()
        .iter()
        .map(|&v| Complex::new(if constant { 0.0 } else { v - mean }, 0.0))
        .collect();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);

    let n_bins = m / 2 + 1;
    let df = 1.0 / (m as f64 * series.dt());
    let frequencies = (0..n_bins).map(|k| k as f64 * df).collect();
    let power = (0..n_bins)
        .map(|k| {
            let mirrored = k != 0 && !(m % 2 == 0 && k == m / 2);
            let c = if mirrored { 2.0 } else { 1.0 };
            c * buf[k].norm_sqr() / m as f64
        })
        .collect();
    Ok(PowerSpectrum { frequencies, power })
}

/// Lowest frequency at which cumulative non-DC power reaches 95 % of the total.
pub fn estimate_cutoff_frequency(spectrum: &PowerSpectrum) -> Result<f64> {
    estimate_cutoff_frequency_with_fraction(spectrum, DEFAULT_POWER_FRACTION)
}

pub fn estimate_cutoff_frequency_with_fraction(spectrum: &PowerSpectrum, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("power fraction must lie in (0, 1], got {fraction}")));
    }
    if spectrum.frequencies.len() != spectrum.power.len() || spectrum.power.len() < 2 {
        return Err(Error::invalid("malformed power spectrum"));
    }
    let total = spectrum.total_power();
    if !(total > 0.0) {
        return Err(Error::NoSignal("spectrum has no power outside DC".into()));
    }
    let target = fraction * total;
    let mut acc = 0.0;
    for k in 1..spectrum.power.len() {
        acc += spectrum.power[k];
        if acc >= target {
            return Ok(spectrum.frequencies[k]);
        }
    }
    // Only reachable through round-off when fraction == 1.
    Ok(*spectrum.frequencies.last().unwrap())
}
