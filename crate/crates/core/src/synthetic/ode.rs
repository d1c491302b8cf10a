//! Adaptive Dormand-Prince 5(4) integration.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (equal to the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

const MAX_STEPS: usize = 10_000_000;

/// States at `times`, which must be non-decreasing and start at `t0`.
///
/// Each output time is hit exactly by shortening the step, so results do not
/// depend on interpolation. The local error per step is kept below
/// `tol * (1 + |state|)` componentwise.
pub fn integrate<F>(rhs: F, t0: f64, y0: &[f64], times: &[f64], tol: f64) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let n = y0.len();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut h = times.windows(2).map(|w| w[1] - w[0]).find(|d| *d > 0.0).unwrap_or(1.0) * 0.1;
    let mut out = Vec::with_capacity(times.len());
    let mut steps = 0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];

    for &target in times {
        if target < t {
            return Err(Error::invalid("output times must be non-decreasing"));
        }
        while t < target {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::invalid("ODE integration exceeded its step budget"));
            }
            let last = h >= target - t;
            let step = if last { target - t } else { h };
            k[0] = rhs(t, &y);
            for s in 1..7 {
                for i in 0..n {
                    tmp[i] = y[i] + step * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                }
                k[s] = rhs(t + C[s] * step, &tmp);
            }
            let mut err = 0.0f64;
            let mut next = vec![0.0; n];
            for i in 0..n {
                let y5 = y[i] + step * (0..7).map(|j| B5[j] * k[j][i]).sum::<f64>();
                let y4 = y[i] + step * (0..7).map(|j| B4[j] * k[j][i]).sum::<f64>();
                let scale = tol * (1.0 + y[i].abs().max(y5.abs()));
                err = err.max((y5 - y4).abs() / scale);
                next[i] = y5;
            }
            if !err.is_finite() {
                return Err(Error::invalid("ODE state became non-finite"));
            }
            if err <= 1.0 {
                t = if last { target } else { t + step };
                y = next;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            // A shortened final step says nothing about the natural step size.
            if !(last && err <= 1.0) || factor < 1.0 {
                h = step * factor;
            }
        }
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let times: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
        let ys = integrate(|_, y| vec![-y[0]], 0.0, &[2.0], &times, 1e-10).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - 2.0 * (-t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_keeps_phase() {
        let times: Vec<f64> = (0..=200).map(|k| 0.05 * k as f64).collect();
        let ys = integrate(|_, y| vec![y[1], -y[0]], 0.0, &[0.0, 1.0], &times, 1e-10).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.sin()).abs() < 1e-8 && (y[1] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn time_dependent_forcing() {
        let times = [0.0, 0.5, 1.0, 2.0];
        let ys = integrate(|t, _| vec![t.cos()], 0.0, &[0.0], &times, 1e-10).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - t.sin()).abs() < 1e-10);
        }
    }
}
