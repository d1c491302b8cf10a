//! Savitzky-Golay derivative with Gaussian post-smoothing.
//!
//! Each sample gets a least-squares polynomial fit over a centred window.
//! Interior samples use a fixed convolution kernel. Within half a window of
//! either end the window is cut off at the boundary, and the fit degree is
//! reduced if too few samples remain. The raw derivative is then smoothed
//! with a Gaussian kernel, and the position estimate is the trapezoidal
//! integral of the smoothed derivative aligned to the data mean.

use nalgebra::{DMatrix, DVector};

use super::SavGolParams;
use crate::calculus::{convolve_same, gaussian_smooth, trapz};
use crate::error::{Error, Result};
use crate::series::{DerivativeEstimate, TimeSeries};

pub fn savgol_diff(series: &TimeSeries, params: &SavGolParams) -> Result<DerivativeEstimate> {
    let m = series.len();
    if params.window() > m {
        return Err(Error::invalid(format!(
            "window {} exceeds series length {m}",
            params.window()
        )));
    }
    if params.smooth_window() > m {
        return Err(Error::invalid(format!(
            "smoothing window {} exceeds series length {m}",
            params.smooth_window()
        )));
    }
    let raw = savgol_derivative(series.values(), series.dt(), params.window(), params.polyorder())?;
    let dxdt_hat = gaussian_smooth(&raw, params.smooth_window())?;
    let x_hat = aligned_integral(&dxdt_hat, series.values(), series.dt());
    DerivativeEstimate::new(x_hat, dxdt_hat)
}

/// Trapezoidal integral of `derivative`, shifted so its mean matches `y`.
pub(crate) fn aligned_integral(derivative: &[f64], y: &[f64], dt: f64) -> Vec<f64> {
    let mut x = trapz(derivative, dt, 0.0);
    let mu = y.iter().zip(&x).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64;
    x.iter_mut().for_each(|v| *v += mu);
    x
}

/// First derivative of the local polynomial fit at every sample.
pub fn savgol_derivative(y: &[f64], dt: f64, window: usize, polyorder: usize) -> Result<Vec<f64>> {
    let m = y.len();
    if window < 3 || window % 2 == 0 || window > m {
        return Err(Error::invalid(format!("invalid window {window} for {m} samples")));
    }
    if polyorder == 0 || polyorder >= window {
        return Err(Error::invalid(format!("invalid polynomial order {polyorder}")));
    }
    let h = window / 2;
    let kernel = derivative_kernel(h, polyorder);
    let mut out = convolve_same(y, &kernel);
    out.iter_mut().for_each(|v| *v /= dt);

    let left = edge_derivatives(y, h, polyorder);
    let reversed: Vec<f64> = y.iter().rev().copied().collect();
    let right = edge_derivatives(&reversed, h, polyorder);
    for k in 0..h {
        out[k] = left[k] / dt;
        out[m - 1 - k] = -right[k] / dt;
    }
    Ok(out)
}

/// Weights `c_j`, `j = -h..=h`, such that `sum_j c_j y[k + j]` is the slope
/// (per sample) at the centre of the degree-`p` least-squares fit.
fn derivative_kernel(h: usize, p: usize) -> Vec<f64> {
    let n = 2 * h + 1;
    let scale = h as f64;
    let v = DMatrix::from_fn(n, p + 1, |i, a| ((i as f64 - scale) / scale).powi(a as i32));
    let qr = v.qr();
    let r = qr.r();
    let q = qr.q();
    // beta = R^{-1} Q^T y; the slope at u = 0 is beta_1 / h.
    let mut e1 = DVector::zeros(p + 1);
    e1[1] = 1.0;
    // row 1 of R^{-1}: solve R^T w = e1
    let w = r
        .transpose()
        .solve_lower_triangular(&e1)
        .expect("Vandermonde of distinct nodes has full rank");
    let c = q * w;
    c.iter().map(|v| v / scale).collect()
}

/// Slopes (per sample) at positions `0..h` from fits over `[0, k + h]`.
///
/// Uses Chebyshev polynomials on the fixed interval `[0, 2h]` so the normal
/// equations can be assembled from running sums of `T_c(u_i)` and
/// `T_a(u_i) y_i` instead of refitting every window from scratch.
fn edge_derivatives(y: &[f64], h: usize, p: usize) -> Vec<f64> {
    let hf = h as f64;
    let n_moments = 2 * p + 1;
    let mut moment = vec![0.0; n_moments];
    let mut cross = vec![0.0; p + 1];
    let mut t = vec![0.0; n_moments];
    let mut out = Vec::with_capacity(h);

    for i in 0..2 * h {
        let u = (i as f64 - hf) / hf;
        chebyshev_values(u, &mut t);
        for c in 0..n_moments {
            moment[c] += t[c];
        }
        for a in 0..=p {
            cross[a] += t[a] * y[i];
        }
        let n = i + 1;
        if n < h + 1 {
            continue;
        }
        let k = n - h - 1;
        let deg = p.min(n - 1);
        let gram = DMatrix::from_fn(deg + 1, deg + 1, |a, b| 0.5 * (moment[a + b] + moment[a.abs_diff(b)]));
        let rhs = DVector::from_iterator(deg + 1, cross[..=deg].iter().copied());
        let beta = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(deg + 1)),
        };
        let uk = (k as f64 - hf) / hf;
        let mut dt_vals = vec![0.0; deg + 1];
        chebyshev_derivatives(uk, &mut dt_vals);
        let slope: f64 = beta.iter().zip(&dt_vals).map(|(b, d)| b * d).sum();
        out.push(slope / hf);
    }
    out
}

fn chebyshev_values(u: f64, t: &mut [f64]) {
    t[0] = 1.0;
    if t.len() > 1 {
        t[1] = u;
    }
    for c in 2..t.len() {
        t[c] = 2.0 * u * t[c - 1] - t[c - 2];
    }
}

fn chebyshev_derivatives(u: f64, d: &mut [f64]) {
    let n = d.len();
    let mut t = vec![0.0; n.max(2)];
    chebyshev_values(u, &mut t);
    d[0] = 0.0;
    if n > 1 {
        d[1] = 1.0;
    }
    for c in 2..n {
        d[c] = 2.0 * t[c - 1] + 2.0 * u * d[c - 1] - d[c - 2];
    }
}
