//! Zero-phase Butterworth low-pass followed by a forward difference.
//!
//! The digital filter comes from the analog prototype through the bilinear
//! transform with the cutoff pre-warped, and is realised as cascaded
//! second-order sections each normalised to unit DC gain. Filtering runs
//! forward then backward over an odd reflection of `3 (order + 1)` samples
//! at each end, with every section started in its steady state for the
//! first padded sample.

use std::f64::consts::PI;

use super::ButterworthParams;
use crate::calculus::forward_difference;
use crate::error::{Error, Result};
use crate::series::{DerivativeEstimate, TimeSeries};

/// Second-order section `(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// State of the transposed direct form II realisation when input and
    /// output have settled at `u`.
    fn steady_state(&self, u: f64) -> [f64; 2] {
        let s2 = (self.b[2] - self.a[1]) * u;
        let s1 = (self.b[1] - self.a[0]) * u + s2;
        [s1, s2]
    }

    fn run(&self, x: &mut [f64], mut state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        for v in x.iter_mut() {
            let y = b0 * *v + state[0];
            state[0] = b1 * *v - a1 * y + state[1];
            state[1] = b2 * *v - a2 * y;
            *v = y;
        }
    }

    /// Complex frequency response at normalised angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> (f64, f64) {
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let nr = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let ni = self.b[1] * s1 + self.b[2] * s2;
        let dr = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let di = self.a[0] * s1 + self.a[1] * s2;
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }
}

/// Low-pass design as second-order sections (a first-order section is stored
/// with `b2 = a2 = 0`).
pub fn design_lowpass(order: usize, cutoff: f64, dt: f64) -> Result<Vec<Biquad>> {
    let nyquist = 0.5 / dt;
    if order == 0 {
        return Err(Error::invalid("Butterworth order must be at least 1"));
    }
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(Error::invalid(format!(
            "cutoff {cutoff} must lie strictly between 0 and the Nyquist frequency {nyquist}"
        )));
    }
    let k = 2.0 / dt;
    let warped = k * (PI * cutoff * dt).tan();
    let n = order as f64;
    let mut sections = Vec::with_capacity(order.div_ceil(2));

    for i in 0..order / 2 {
        let theta = PI * (2.0 * i as f64 + n + 1.0) / (2.0 * n);
        let (sr, si) = (warped * theta.cos(), warped * theta.sin());
        // z = (k + s) / (k - s)
        let (nr, ni) = (k + sr, si);
        let (dr, di) = (k - sr, -si);
        let den = dr * dr + di * di;
        let zr = (nr * dr + ni * di) / den;
        let zi = (ni * dr - nr * di) / den;
        let a1 = -2.0 * zr;
        let a2 = zr * zr + zi * zi;
        let g = (1.0 + a1 + a2) / 4.0;
        sections.push(Biquad { b: [g, 2.0 * g, g], a: [a1, a2] });
    }
    if order % 2 == 1 {
        let z = (k - warped) / (k + warped);
        let g = (1.0 - z) / 2.0;
        sections.push(Biquad { b: [g, g, 0.0], a: [-z, 0.0] });
    }
    Ok(sections)
}

pub fn padding_len(order: usize) -> usize {
    3 * (order + 1)
}

/// Forward-backward filtering with odd reflection padding.
pub fn filtfilt(sections: &[Biquad], x: &[f64], padlen: usize) -> Vec<f64> {
    let m = x.len();
    let pad = padlen.min(m - 1);
    let mut ext = Vec::with_capacity(m + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[m - 1] - x[m - 1 - i]));

    let pass = |buf: &mut Vec<f64>| {
        let u = buf[0];
        for s in sections {
            s.run(buf, s.steady_state(u));
        }
    };
    pass(&mut ext);
    ext.reverse();
    pass(&mut ext);
    ext.reverse();
    ext[pad..pad + m].to_vec()
}

pub fn butterworth_diff(series: &TimeSeries, params: &ButterworthParams) -> Result<DerivativeEstimate> {
    let order = params.order();
    let need = padding_len(order);
    if series.len() < need {
        return Err(Error::invalid(format!(
            "order {order} needs at least {need} samples for padding, got {}",
            series.len()
        )));
    }
    let sections = design_lowpass(order, params.cutoff(), series.dt())?;
    let x_hat = filtfilt(&sections, series.values(), need);
    let dxdt_hat = forward_difference(&x_hat, series.dt());
    DerivativeEstimate::new(x_hat, dxdt_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::power_spectrum;
    use std::f64::consts::TAU;

    fn params(order: usize, cutoff: f64) -> ButterworthParams {
        ButterworthParams::new(order, cutoff).unwrap()
    }

    #[test]
    fn magnitude_response_is_butterworth() {
        // |H|^2 = 1 / (1 + (tan(w/2) / tan(wc/2))^(2N)) for the bilinear design.
        let dt = 0.01;
        for order in 1..=6 {
            let sections = design_lowpass(order, 5.0, dt).unwrap();
            for f in [0.0, 1.0, 5.0, 12.0, 30.0] {
                let w = TAU * f * dt;
                let mut mag2 = 1.0;
                for s in &sections {
                    let (re, im) = s.response(w);
                    mag2 *= re * re + im * im;
                }
                let ratio = (w / 2.0).tan() / (PI * 5.0 * dt).tan();
                let expected = 1.0 / (1.0 + ratio.powi(2 * order as i32));
                assert!((mag2 - expected).abs() < 1e-10, "order {order} f {f}: {mag2} vs {expected}");
            }
        }
    }

    #[test]
    fn constant_passes_through() {
        let s = TimeSeries::new(vec![4.2; 50], 0.01).unwrap();
        let est = butterworth_diff(&s, &params(3, 2.0)).unwrap();
        for (a, d) in est.x_hat.iter().zip(&est.dxdt_hat) {
            assert!((a - 4.2).abs() < 1e-12);
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn clean_sine_derivative() {
        let dt = 0.001;
        let m = 2000;
        let y: Vec<f64> = (0..m).map(|k| (TAU * k as f64 * dt).sin()).collect();
        let est = butterworth_diff(&TimeSeries::new(y, dt).unwrap(), &params(2, 10.0)).unwrap();
        let lo = m / 10;
        let hi = m - m / 10;
        let (mut se, mut st) = (0.0, 0.0);
        for k in lo..hi {
            // Forward difference estimates the slope half a step ahead.
            let truth = TAU * (TAU * (k as f64 + 0.5) * dt).cos();
            se += (est.dxdt_hat[k] - truth).powi(2);
            st += truth * truth;
        }
        assert!((se / st).sqrt() < 0.02);
    }

    #[test]
    fn attenuates_out_of_band_tone() {
        let dt = 0.001;
        let m = 4000;
        let y: Vec<f64> = (0..m)
            .map(|k| {
                let t = k as f64 * dt;
                (TAU * t).sin() + 0.1 * (TAU * 40.0 * t).sin()
            })
            .collect();
        let input = TimeSeries::new(y, dt).unwrap();
        let est = butterworth_diff(&input, &params(2, 5.0)).unwrap();
        let p_in = power_spectrum(&input).unwrap();
        let p_out = power_spectrum(&TimeSeries::new(est.x_hat, dt).unwrap()).unwrap();
        let bin = (40.0 / p_in.resolution()).round() as usize;
        assert!((p_in.frequencies[bin] - 40.0).abs() < 1e-9);
        assert!(p_out.power[bin] <= 0.01 * p_in.power[bin]);
    }

    #[test]
    fn rejects_invalid_settings() {
        let s = TimeSeries::new(vec![0.0; 10], 0.1).unwrap();
        assert!(butterworth_diff(&s, &params(2, 5.0)).is_err());
        assert!(butterworth_diff(&s, &params(4, 1.0)).is_err());
        assert!(butterworth_diff(&s, &params(2, 1.0)).is_ok());
    }
}
