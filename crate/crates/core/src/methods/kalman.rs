//! Constant-acceleration Kalman filter with a Rauch-Tung-Striebel smoother.
//!
//! The state is `(position, velocity, acceleration)` driven by white jerk of
//! spectral density `q`; only position is measured, with variance `r`.

use nalgebra::{Matrix3, RowVector3, Vector3};

use super::KalmanParams;
use crate::error::{Error, Result};
use crate::series::{variance, DerivativeEstimate, TimeSeries};

/// Samples used for the initial quadratic fit.
const INIT_FIT_LEN: usize = 20;
/// Initial covariance is this multiple of the signal variance.
const INIT_COV_SCALE: f64 = 1e3;

struct Model {
    f: Matrix3<f64>,
    q: Matrix3<f64>,
    r: f64,
}

impl Model {
    fn new(params: &KalmanParams, dt: f64) -> Self {
        let f = Matrix3::new(1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt, 0.0, 0.0, 1.0);
        let (d1, d2, d3, d4, d5) = (dt, dt.powi(2), dt.powi(3), dt.powi(4), dt.powi(5));
        let q = params.q()
            * Matrix3::new(
                d5 / 20.0, d4 / 8.0, d3 / 6.0,
                d4 / 8.0, d3 / 3.0, d2 / 2.0,
                d3 / 6.0, d2 / 2.0, d1,
            );
        Self { f, q, r: params.r() }
    }
}

struct ForwardPass {
    filtered: Vec<Vector3<f64>>,
    filtered_cov: Vec<Matrix3<f64>>,
    predicted: Vec<Vector3<f64>>,
    predicted_cov: Vec<Matrix3<f64>>,
}

pub fn kalman_diff(series: &TimeSeries, params: &KalmanParams) -> Result<DerivativeEstimate> {
    let model = Model::new(params, series.dt());
    let fwd = forward(series, &model);
    let smoothed = rts(&fwd, &model)?;
    estimate_from(&smoothed)
}

/// Forward filter only, without the backward smoothing pass.
pub fn kalman_filter_only(series: &TimeSeries, params: &KalmanParams) -> Result<DerivativeEstimate> {
    let model = Model::new(params, series.dt());
    let fwd = forward(series, &model);
    estimate_from(&fwd.filtered)
}

fn estimate_from(states: &[Vector3<f64>]) -> Result<DerivativeEstimate> {
    let x_hat = states.iter().map(|s| s[0]).collect();
    let dxdt_hat = states.iter().map(|s| s[1]).collect();
    DerivativeEstimate::new(x_hat, dxdt_hat)
}

/// Least-squares quadratic through the first samples, as `(x, v, a)` at `t = 0`.
fn initial_state(y: &[f64], dt: f64) -> Vector3<f64> {
    let n = y.len().min(INIT_FIT_LEN);
    // Fit in sample units for conditioning, then rescale.
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (k, &v) in y.iter().take(n).enumerate() {
        let s = k as f64;
        let row = Vector3::new(1.0, s, s * s);
        ata += row * row.transpose();
        aty += row * v;
    }
    let c = ata.cholesky().map(|ch| ch.solve(&aty)).unwrap_or_else(|| Vector3::new(y[0], 0.0, 0.0));
    Vector3::new(c[0], c[1] / dt, 2.0 * c[2] / (dt * dt))
}

fn forward(series: &TimeSeries, model: &Model) -> ForwardPass {
    let y = series.values();
    let m = y.len();
    let h = RowVector3::new(1.0, 0.0, 0.0);
    let mut x = initial_state(y, series.dt());
    let mut p = Matrix3::identity() * (INIT_COV_SCALE * variance(y));

    let mut out = ForwardPass {
        filtered: Vec::with_capacity(m),
        filtered_cov: Vec::with_capacity(m),
        predicted: Vec::with_capacity(m),
        predicted_cov: Vec::with_capacity(m),
    };
    for (k, &yk) in y.iter().enumerate() {
        if k > 0 {
            x = model.f * x;
            p = model.f * p * model.f.transpose() + model.q;
        }
        out.predicted.push(x);
        out.predicted_cov.push(p);

        let s = p[(0, 0)] + model.r;
        let gain = p.column(0) / s;
        let innovation = yk - x[0];
        x += gain * innovation;
        // Joseph form keeps the covariance symmetric positive semidefinite.
        let i_kh = Matrix3::identity() - gain * h;
        p = i_kh * p * i_kh.transpose() + gain * gain.transpose() * model.r;
        p = 0.5 * (p + p.transpose());

        out.filtered.push(x);
        out.filtered_cov.push(p);
    }
    out
}

fn rts(fwd: &ForwardPass, model: &Model) -> Result<Vec<Vector3<f64>>> {
    let m = fwd.filtered.len();
    let mut smoothed = fwd.filtered.clone();
    for k in (0..m - 1).rev() {
        let pp = fwd.predicted_cov[k + 1];
        // C = P_k F^T P_pred^{-1}, computed as the solution of P_pred C^T = F P_k.
        let rhs = model.f * fwd.filtered_cov[k];
        let ct = match pp.cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => pp
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::invalid("Kalman smoother met a singular predicted covariance"))?,
        };
        let c = ct.transpose();
        smoothed[k] = fwd.filtered[k] + c * (smoothed[k + 1] - fwd.predicted[k + 1]);
    }
    Ok(smoothed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rmse;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn params(q: f64, r: f64) -> KalmanParams {
        KalmanParams::new(q, r).unwrap()
    }

    fn interior(m: usize) -> std::ops::Range<usize> {
        m / 10..m - m / 10
    }

    #[test]
    fn constant_velocity_is_recovered() {
        let dt = 0.01;
        let m = 500;
        let y: Vec<f64> = (0..m).map(|k| 2.0 * k as f64 * dt).collect();
        let est = kalman_diff(&TimeSeries::new(y, dt).unwrap(), &params(1.0, 1e-4)).unwrap();
        for k in interior(m) {
            assert!((est.dxdt_hat[k] - 2.0).abs() <= 1e-3, "k={k}: {}", est.dxdt_hat[k]);
        }
    }

    #[test]
    fn constant_acceleration_is_recovered() {
        let dt = 0.01;
        let m = 500;
        let y: Vec<f64> = (0..m).map(|k| (k as f64 * dt).powi(2)).collect();
        let est = kalman_diff(&TimeSeries::new(y, dt).unwrap(), &params(10.0, 1e-4)).unwrap();
        for k in interior(m) {
            let truth = 2.0 * k as f64 * dt;
            assert!((est.dxdt_hat[k] - truth).abs() <= 1e-3, "k={k}");
        }
    }

    #[test]
    fn constant_gives_zero_velocity() {
        for c in [0.0, 3.5, -1e4] {
            let s = TimeSeries::new(vec![c; 100], 0.1).unwrap();
            for (q, r) in [(1e-6, 1.0), (1.0, 1e-6), (1e3, 1e3)] {
                let est = kalman_diff(&s, &params(q, r)).unwrap();
                let max = est.dxdt_hat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                assert!(max <= 1e-6 * c.abs() + 1e-9, "c={c} q={q} r={r}: {max}");
            }
        }
    }

    #[test]
    fn smoother_beats_filter() {
        let dt = 0.01;
        let m = 1000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let y: Vec<f64> = (0..m).map(|k| 1.5 * k as f64 * dt + noise.sample(&mut rng)).collect();
        let truth = vec![1.5; m];
        let s = TimeSeries::new(y, dt).unwrap();
        let p = params(1.0, 0.01);
        let smooth = kalman_diff(&s, &p).unwrap();
        let filt = kalman_filter_only(&s, &p).unwrap();
        assert!(rmse(&smooth.dxdt_hat, &truth).unwrap() < rmse(&filt.dxdt_hat, &truth).unwrap());
    }
}
