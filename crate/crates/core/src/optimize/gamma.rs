//! Choosing the loss weight `gamma` from the cutoff frequency and time step.
//!
//! `ln gamma = a_f ln f + a_dt ln dt + b`, natural logarithms throughout.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::spectrum::{estimate_cutoff_frequency, power_spectrum};

/// Time steps outside this range are far from the data the default model
/// was fitted on.
pub const RECOMMENDED_DT: (f64, f64) = (1e-3, 1e-1);

/// Log-linear model of the loss weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaModel {
    pub coef_log_freq: f64,
    pub coef_log_dt: f64,
    pub intercept: f64,
}

impl Default for GammaModel {
    fn default() -> Self {
        Self { coef_log_freq: -1.6, coef_log_dt: -0.71, intercept: -5.1 }
    }
}

impl GammaModel {
    pub fn gamma(&self, freq: f64, dt: f64) -> Result<f64> {
        gamma_from_heuristic(freq, dt, self)
    }
}

pub fn gamma_from_heuristic(freq: f64, dt: f64, model: &GammaModel) -> Result<f64> {
    if !(freq.is_finite() && freq > 0.0) || !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("frequency and dt must be positive, got f={freq}, dt={dt}")));
    }
    let g = (model.coef_log_freq * freq.ln() + model.coef_log_dt * dt.ln() + model.intercept).exp();
    if !(g.is_finite() && g > 0.0) {
        return Err(Error::invalid(format!("gamma overflows for f={freq}, dt={dt}")));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSuggestion {
    pub gamma: f64,
    pub cutoff: f64,
    pub warnings: Vec<String>,
    /// Power of ten to multiply the time axis by so that `dt` falls in
    /// [`RECOMMENDED_DT`]; `None` when it already does.
    pub time_rescale: Option<f64>,
}

/// Cutoff from the power spectrum (unless overridden) and the implied gamma
/// under the default model.
pub fn suggest_gamma(series: &TimeSeries, cutoff_override: Option<f64>) -> Result<GammaSuggestion> {
    suggest_gamma_with(series, cutoff_override, &GammaModel::default())
}

pub fn suggest_gamma_with(
    series: &TimeSeries,
    cutoff_override: Option<f64>,
    model: &GammaModel,
) -> Result<GammaSuggestion> {
    let cutoff = match cutoff_override {
        Some(c) if c.is_finite() && c > 0.0 => c,
        Some(c) => return Err(Error::invalid(format!("cutoff must be positive, got {c}"))),
        None => estimate_cutoff_frequency(&power_spectrum(series)?)?,
    };
    let dt = series.dt();
    let gamma = gamma_from_heuristic(cutoff, dt, model)?;
    let mut warnings = Vec::new();
    let mut time_rescale = None;
    if dt < RECOMMENDED_DT.0 || dt > RECOMMENDED_DT.1 {
        let factor = 10f64.powi(-(dt.log10() + 2.0).round() as i32);
        warnings.push(format!(
            "dt = {dt:e} lies outside [{:e}, {:e}]; the heuristic is calibrated there. \
             Consider multiplying the time axis by {factor:e}",
            RECOMMENDED_DT.0, RECOMMENDED_DT.1
        ));
        time_rescale = Some(factor);
    }
    Ok(GammaSuggestion { gamma, cutoff, warnings, time_rescale })
}

/// One training point: a cutoff frequency, a time step and the gamma that
/// worked best for them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaObservation {
    pub freq: f64,
    pub dt: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit {
    pub model: GammaModel,
    pub r_squared: f64,
    /// `1 - (1 - R^2)(n - 1)/(n - 3)`; equal to `r_squared` when `n = 3`.
    pub adjusted_r_squared: f64,
}

/// Ordinary least squares of `ln gamma` on `ln f`, `ln dt` and an intercept.
pub fn fit_gamma_model(observations: &[GammaObservation]) -> Result<GammaFit> {
    let n = observations.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 observations, got {n}")));
    }
    for o in observations {
        let ok = [o.freq, o.dt, o.gamma].iter().all(|v| v.is_finite() && *v > 0.0);
        if !ok {
            return Err(Error::invalid(format!("observations must be positive, got {o:?}")));
        }
    }
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => observations[i].freq.ln(),
        1 => observations[i].dt.ln(),
        _ => 1.0,
    });
    let b = DVector::from_iterator(n, observations.iter().map(|o| o.gamma.ln()));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return Err(Error::Fit(
            "design matrix is rank deficient (frequencies or time steps do not vary independently)".into(),
        ));
    }
    let coef = svd.solve(&b, 0.0).map_err(|e| Error::Fit(e.to_string()))?;

    let fitted = &a * &coef;
    let mean = b.mean();
    let sse: f64 = b.iter().zip(fitted.iter()).map(|(y, f)| (y - f).powi(2)).sum();
    let sst: f64 = b.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse <= 1e-24 * n as f64 {
        1.0
    } else {
        0.0
    };
    let adjusted = if n > 3 {
        1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - 3.0)
    } else {
        r2
    };
    Ok(GammaFit {
        model: GammaModel { coef_log_freq: coef[0], coef_log_dt: coef[1], intercept: coef[2] },
        r_squared: r2,
        adjusted_r_squared: adjusted,
    })
}
