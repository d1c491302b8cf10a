//! Differencing, integration, total variation and kernel smoothing.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::cell::RefCell;

use crate::error::{Error, Result};

/// Forward difference `(x[k+1] - x[k]) / dt`, with the last element
/// repeating its neighbour so the output keeps the input length.
pub fn finite_difference(values: &[f64], dt: f64) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::invalid("finite difference needs at least 2 samples"));
    }
    check_dt(dt)?;
    Ok(forward_difference(values, dt))
}

pub(crate) fn forward_difference(values: &[f64], dt: f64) -> Vec<f64> {
    let m = values.len();
    let mut out = Vec::with_capacity(m);
    out.extend(values.windows(2).map(|w| (w[1] - w[0]) / dt));
    let last = out[m - 2];
    out.push(last);
    out
}

/// Cumulative trapezoidal integral starting from `x0`.
pub fn trapezoidal_integral(derivative: &[f64], dt: f64, x0: f64) -> Result<Vec<f64>> {
    if derivative.is_empty() {
        return Err(Error::invalid("cannot integrate an empty sequence"));
    }
    check_dt(dt)?;
    Ok(trapz(derivative, dt, x0))
}

pub(crate) fn trapz(derivative: &[f64], dt: f64, x0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(derivative.len());
    let mut acc = x0;
    out.push(acc);
    for w in derivative.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Mean absolute step between neighbours, normalised by the sequence length.
pub fn total_variation(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::invalid("total variation needs at least 2 samples"));
    }
    Ok(tv(x))
}

pub(crate) fn tv(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / x.len() as f64
}

/// Third differences `x[k+3] - 3x[k+2] + 3x[k+1] - x[k]`.
pub fn third_differences(x: &[f64]) -> Vec<f64> {
    x.windows(4)
        .map(|w| w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0])
        .collect()
}

/// Normalised Gaussian kernel with `window` taps and sigma `window / 6`.
pub fn gaussian_kernel(window: usize) -> Vec<f64> {
    let half = (window / 2) as f64;
    let sigma = window as f64 / 6.0;
    let raw: Vec<f64> = (0..window)
        .map(|j| {
            let d = j as f64 - half;
            (-0.5 * d * d / (sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Gaussian smoothing. Near the edges the kernel is truncated to the
/// samples that exist and renormalised, so constants are preserved.
pub fn gaussian_smooth(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid(format!("smoothing window must be odd, got {window}")));
    }
    if window > x.len() {
        return Err(Error::invalid(format!(
            "smoothing window {window} exceeds series length {}",
            x.len()
        )));
    }
    if window == 1 {
        return Ok(x.to_vec());
    }
    let kernel = gaussian_kernel(window);
    let half = window / 2;
    let m = x.len();
    let numer = convolve_same(x, &kernel);

    // Kernel mass that falls on existing samples: prefix sums of the kernel.
    let mut prefix = Vec::with_capacity(window + 1);
    prefix.push(0.0);
    for w in &kernel {
        prefix.push(prefix.last().unwrap() + w);
    }
    let out = numer
        .iter()
        .enumerate()
        .map(|(k, n)| {
            let lo = half.saturating_sub(k);
            let hi = (m - 1 - k).min(half) + half + 1;
            if lo == 0 && hi == window {
                *n
            } else {
                n / (prefix[hi] - prefix[lo])
            }
        })
        .collect();
    Ok(out)
}

/// `out[k] = sum_j kernel[j] * x[k + j - h]` with zeros outside the signal,
/// where `h = kernel.len() / 2`. Switches to FFT for long kernels.
pub(crate) fn convolve_same(x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let m = x.len();
    let w = kernel.len();
    let h = w / 2;
    if w <= 48 || m <= 64 {
        let mut out = vec![0.0; m];
        for (k, o) in out.iter_mut().enumerate() {
            let j_lo = h.saturating_sub(k);
            let j_hi = (m + h - k).min(w);
            let mut acc = 0.0;
            for j in j_lo..j_hi {
                acc += kernel[j] * x[k + j - h];
            }
            *o = acc;
        }
        return out;
    }

    let len = (m + w - 1).next_power_of_two();
    let (fwd, inv) = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(len), p.plan_fft_inverse(len))
    });

    let mut a: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(len, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = kernel.iter().rev().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(len, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    inv.process(&mut a);
    let scale = 1.0 / len as f64;
    (0..m).map(|k| a[k + h].re * scale).collect()
}

thread_local! {
    // Plans are cached by the planner, so repeated lengths skip setup.
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("time step must be positive, got {dt}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn finite_difference_examples() {
        assert_eq!(finite_difference(&[0.0, 1.0, 2.0], 1.0).unwrap(), vec![1.0, 1.0, 1.0]);
        assert_eq!(finite_difference(&[5.0; 4], 0.1).unwrap(), vec![0.0; 4]);
        assert_eq!(finite_difference(&[0.0, 1.0, 0.0], 0.5).unwrap(), vec![2.0, -2.0, -2.0]);
        assert!(finite_difference(&[1.0], 1.0).is_err());
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(trapezoidal_integral(&[1.0; 3], 1.0, 0.0).unwrap(), vec![0.0, 1.0, 2.0]);
        assert_eq!(trapezoidal_integral(&[0.0; 3], 0.1, 7.0).unwrap(), vec![7.0; 3]);
        assert_eq!(trapezoidal_integral(&[0.0, 2.0, 0.0], 1.0, 0.0).unwrap(), vec![0.0, 1.0, 2.0]);
        assert!(trapezoidal_integral(&[], 1.0, 0.0).is_err());
    }

    #[test]
    fn total_variation_examples() {
        assert_eq!(total_variation(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(total_variation(&[0.0, 1.0, 0.0]).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(total_variation(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 0.75, epsilon = 1e-15);
        assert!(total_variation(&[1.0]).is_err());
    }

    #[test]
    fn gaussian_smooth_examples() {
        let x = [0.3, -1.0, 2.5, 4.0];
        assert_eq!(gaussian_smooth(&x, 1).unwrap(), x.to_vec());
        let c = gaussian_smooth(&[5.0; 5], 3).unwrap();
        for v in c {
            assert_abs_diff_eq!(v, 5.0, epsilon = 1e-14);
        }

        // Impulse response: kernel weights are exp(-0.5 d^2 / 0.25) for d in {-1,0,1}.
        let w_side = (-2.0f64).exp();
        let centre = 1.0 / (1.0 + 2.0 * w_side);
        let side = w_side / (1.0 + 2.0 * w_side);
        let out = gaussian_smooth(&[0.0, 0.0, 1.0, 0.0, 0.0], 3).unwrap();
        assert_abs_diff_eq!(out[2], centre, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], side, epsilon = 1e-15);
        assert_abs_diff_eq!(out[3], side, epsilon = 1e-15);
        assert!(out[2] > 0.0 && out[2] < 1.0);
        assert_eq!(out[0], 0.0);

        assert!(gaussian_smooth(&[1.0; 5], 2).is_err());
        assert!(gaussian_smooth(&[1.0; 5], 7).is_err());
    }

    #[test]
    fn fft_and_direct_convolution_agree() {
        let x: Vec<f64> = (0..300).map(|k| ((k * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let kernel = gaussian_kernel(81);
        let fast = convolve_same(&x, &kernel);
        let h = 40usize;
        for k in 0..x.len() {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let idx = k as isize + j as isize - h as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += w * x[idx as usize];
                }
            }
            assert_abs_diff_eq!(fast[k], acc, epsilon = 1e-12);
        }
    }

    #[test]
    fn third_differences_of_quadratic_vanish() {
        let x: Vec<f64> = (0..10).map(|k| (k * k) as f64).collect();
        assert!(third_differences(&x).iter().all(|d| d.abs() < 1e-12));
    }
}
