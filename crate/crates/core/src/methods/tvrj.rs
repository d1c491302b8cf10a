//! Total-variation regularized jerk.
//!
//! Solves `min_x ||y - x||_2 + lambda ||D4 x||_1` where `D4` is the fourth
//! difference of positions, equal to the third difference of the forward
//! difference derivative `d = (x[k+1] - x[k]) / dt`. The weight is
//! `lambda = gamma_tv / (n dt^4)` for an `n`-sample window, so `gamma_tv`
//! multiplies the mean absolute third difference of `d / dt^3`.
//!
//! Windows are first normalised to zero mean and unit standard deviation.
//! Because the fidelity norm is not squared, the problem is positively
//! homogeneous and the normalisation does not change the minimiser. Three
//! closed-form cases are detected before iterating:
//!
//! * `lambda <= 1 / ||D4^T sign(D4 y)||_2`: the data are optimal, `x = y`.
//! * `lambda >= ||s||_inf` with `D4^T s` the unit residual of the cubic fit:
//!   the cubic least-squares fit is optimal.
//! * cubic data: `x = y` for every `lambda`.
//!
//! Otherwise a log-barrier interior-point method solves the epigraph form.
//! The returned iterate is the one with the lowest objective seen.

use rayon::prelude::*;

use super::banded::{apply_d4, apply_d4t, weighted_d4_gram, D4};
use super::TvrjParams;
use crate::calculus::forward_difference;
use crate::error::{Error, Result};
use crate::methods::savgol::aligned_integral;
use crate::series::{DerivativeEstimate, TimeSeries};

/// Shortest series the solver accepts.
pub const MIN_TVRJ_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TvrjOptions {
    /// Samples per window; longer series are solved in overlapping windows.
    pub window_len: usize,
    /// Fraction of each window shared with its successor, in `[0, 1)`.
    pub overlap: f64,
    /// Bound on the duality gap relative to the objective.
    pub tolerance: f64,
    /// Cap on Newton steps per window.
    pub max_iterations: usize,
    /// Keep the per-iteration objective of every window.
    pub record_objective: bool,
    /// Solve windows on the rayon pool.
    pub parallel: bool,
}

impl Default for TvrjOptions {
    fn default() -> Self {
        Self {
            window_len: 1000,
            overlap: 0.5,
            tolerance: 1e-9,
            max_iterations: 10_000,
            record_objective: false,
            parallel: true,
        }
    }
}

/// How a window was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowPath {
    /// `x = y` is optimal.
    Identity,
    /// The cubic least-squares fit is optimal.
    Cubic,
    Iterative,
}

#[derive(Debug, Clone)]
pub struct WindowReport {
    pub start: usize,
    pub len: usize,
    pub path: WindowPath,
    pub iterations: usize,
    /// Best objective after each Newton step, in normalised units. Empty
    /// unless requested.
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TvrjSolution {
    pub estimate: DerivativeEstimate,
    /// Blended positions whose forward difference is the derivative.
    pub positions: Vec<f64>,
    pub windows: Vec<WindowReport>,
}

pub fn tvrj_diff(series: &TimeSeries, params: &TvrjParams) -> Result<DerivativeEstimate> {
    tvrj_diff_with(series, params, &TvrjOptions::default()).map(|s| s.estimate)
}

pub fn tvrj_diff_with(series: &TimeSeries, params: &TvrjParams, opts: &TvrjOptions) -> Result<TvrjSolution> {
    check_options(opts)?;
    let y = series.values();
    let m = y.len();
    if m < MIN_TVRJ_LEN {
        return Err(Error::invalid(format!("TVRJ needs at least {MIN_TVRJ_LEN} samples, got {m}")));
    }
    let dt = series.dt();
    let gamma = params.gamma_tv();
    let starts = window_starts(m, opts);
    let len = opts.window_len.min(m);

    let solve = |&a: &usize| solve_window(&y[a..a + len], dt, gamma, opts).map(|w| (a, w));
    let solved: Vec<(usize, WindowSolve)> = if opts.parallel && starts.len() > 1 {
        starts.par_iter().map(solve).collect::<Result<_>>()?
    } else {
        starts.iter().map(solve).collect::<Result<_>>()?
    };

    let positions = blend(m, len, &solved);
    let dxdt_hat = forward_difference(&positions, dt);
    let x_hat = aligned_integral(&dxdt_hat, y, dt);
    let windows = solved
        .into_iter()
        .map(|(start, w)| WindowReport {
            start,
            len,
            path: w.path,
            iterations: w.iterations,
            objective: w.objective,
        })
        .collect();
    Ok(TvrjSolution { estimate: DerivativeEstimate::new(x_hat, dxdt_hat)?, positions, windows })
}

/// Range of `gamma_tv` over which the solution is not in closed form, as
/// `(largest gamma giving x = y, smallest gamma giving the cubic fit)` across
/// all windows. Both are `None` when every window is cubic.
pub fn nontrivial_gamma_range(series: &TimeSeries, opts: &TvrjOptions) -> Option<(f64, f64)> {
    let y = series.values();
    let m = y.len();
    if m < MIN_TVRJ_LEN {
        return None;
    }
    let len = opts.window_len.min(m);
    let scale = len as f64 * series.dt().powi(4);
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for a in window_starts(m, opts) {
        let w = &y[a..a + len];
        let Some(norm) = normalise(w) else { continue };
        let Some(b) = thresholds(&norm) else { continue };
        lo = lo.min(b.exact * scale);
        hi = hi.max(b.cubic * scale);
    }
    (hi > 0.0).then_some((lo, hi))
}

fn check_options(opts: &TvrjOptions) -> Result<()> {
    if opts.window_len < MIN_TVRJ_LEN {
        return Err(Error::invalid(format!("TVRJ window must hold at least {MIN_TVRJ_LEN} samples")));
    }
    if !(0.0..1.0).contains(&opts.overlap) {
        return Err(Error::invalid(format!("overlap must lie in [0, 1), got {}", opts.overlap)));
    }
    if !(opts.tolerance > 0.0) || opts.max_iterations == 0 {
        return Err(Error::invalid("TVRJ tolerance and iteration cap must be positive"));
    }
    Ok(())
}

/// Window starts; the last window ends at the last sample.
fn window_starts(m: usize, opts: &TvrjOptions) -> Vec<usize> {
    let w = opts.window_len;
    if m <= w {
        return vec![0];
    }
    let step = ((w as f64 * (1.0 - opts.overlap)).round() as usize).max(1);
    let mut starts: Vec<usize> = (0..).map(|i| i * step).take_while(|&a| a + w < m).collect();
    starts.push(m - w);
    starts
}

/// Weighted average of overlapping windows with tent weights that vanish
/// half a sample beyond each window.
fn blend(m: usize, len: usize, solved: &[(usize, WindowSolve)]) -> Vec<f64> {
    if let [(_, only)] = solved {
        return only.x.clone();
    }
    let mut num = vec![0.0; m];
    let mut den = vec![0.0; m];
    for (a, w) in solved {
        for (i, v) in w.x.iter().enumerate() {
            let weight = (i as f64 + 0.5).min(len as f64 - i as f64 - 0.5);
            num[a + i] += weight * v;
            den[a + i] += weight;
        }
    }
    num.iter().zip(&den).map(|(n, d)| n / d).collect()
}

struct WindowSolve {
    x: Vec<f64>,
    path: WindowPath,
    iterations: usize,
    objective: Vec<f64>,
}

struct Normalised {
    mean: f64,
    std: f64,
    y: Vec<f64>,
}

fn normalise(y: &[f64]) -> Option<Normalised> {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let std = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(std > 1e-14 * scale) || std == 0.0 {
        return None;
    }
    Some(Normalised { mean, std, y: y.iter().map(|v| (v - mean) / std).collect() })
}

struct Thresholds {
    exact: f64,
    cubic: f64,
    fit: Vec<f64>,
}

/// Closed-form breakpoints of the regularisation path, or `None` for cubic data.
fn thresholds(norm: &Normalised) -> Option<Thresholds> {
    let y = &norm.y;
    let n = y.len();
    let fit = cubic_fit(y);
    let resid: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let resid_norm = l2(&resid);
    if resid_norm <= 1e-12 * (n as f64).sqrt() {
        return None;
    }

    let mut d4y = vec![0.0; n - 4];
    apply_d4(y, &mut d4y);
    let signs: Vec<f64> = d4y
        .iter()
        .map(|v| if *v == 0.0 { 0.0 } else { v.signum() })
        .collect();
    let mut g = vec![0.0; n];
    apply_d4t(&signs, &mut g);
    let exact = 1.0 / l2(&g);

    // D4^T s = r / |r| has a unique solution because r is orthogonal to cubics;
    // the first n - 4 rows determine it by forward substitution.
    let mut s = vec![0.0; n - 4];
    for i in 0..n - 4 {
        let mut acc = resid[i] / resid_norm;
        for c in 1..5.min(i + 1) {
            acc -= D4[c] * s[i - c];
        }
        s[i] = acc;
    }
    let cubic = s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Some(Thresholds { exact, cubic, fit })
}

fn solve_window(y: &[f64], dt: f64, gamma: f64, opts: &TvrjOptions) -> Result<WindowSolve> {
    let n = y.len();
    let closed = |x: Vec<f64>, path| WindowSolve { x, path, iterations: 0, objective: Vec::new() };
    if gamma == 0.0 {
        return Ok(closed(y.to_vec(), WindowPath::Identity));
    }
    let Some(norm) = normalise(y) else {
        return Ok(closed(y.to_vec(), WindowPath::Identity));
    };
    let Some(th) = thresholds(&norm) else {
        return Ok(closed(y.to_vec(), WindowPath::Identity));
    };
    let lambda = gamma / (n as f64 * dt.powi(4));
    let record = |x: &[f64], lambda: f64| {
        if opts.record_objective {
            vec![objective(&norm.y, x, lambda)]
        } else {
            Vec::new()
        }
    };
    if lambda <= th.exact {
        let mut out = closed(y.to_vec(), WindowPath::Identity);
        out.objective = record(&norm.y, lambda);
        return Ok(out);
    }
    if lambda >= th.cubic {
        let mut out = closed(denormalise(&norm, &th.fit), WindowPath::Cubic);
        out.objective = record(&th.fit, lambda);
        return Ok(out);
    }
    let sol = barrier(&norm.y, lambda, opts);
    let x = denormalise(&norm, &sol.x);
    if !sol.converged {
        return Err(Error::Convergence { iterations: sol.iterations, residual: sol.gap, last_iterate: x });
    }
    Ok(WindowSolve { x, path: WindowPath::Iterative, iterations: sol.iterations, objective: sol.objective })
}

fn denormalise(norm: &Normalised, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| norm.mean + norm.std * v).collect()
}

fn objective(y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let mut d4 = vec![0.0; x.len() - 4];
    apply_d4(x, &mut d4);
    let fid = y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    fid + lambda * d4.iter().map(|v| v.abs()).sum::<f64>()
}

fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Least-squares cubic through `y`, evaluated at the samples.
fn cubic_fit(y: &[f64]) -> Vec<f64> {
    use nalgebra::{DMatrix, DVector};
    let n = y.len();
    let half = (n - 1) as f64 / 2.0;
    let u = |i: usize| (i as f64 - half) / half;
    let v = DMatrix::from_fn(n, 4, |i, a| u(i).powi(a as i32));
    let rhs = DVector::from_column_slice(y);
    let qr = v.clone().qr();
    let qty = qr.q().transpose() * &rhs;
    let beta = qr
        .r()
        .solve_upper_triangular(&qty)
        .expect("cubic design matrix has full rank for n >= 4");
    (&v * beta).iter().copied().collect()
}

struct Barrier {
    x: Vec<f64>,
    converged: bool,
    iterations: usize,
    gap: f64,
    objective: Vec<f64>,
}

/// Barrier weight grows by this factor between centering stages.
const BARRIER_GROWTH: f64 = 10.0;
/// A centering stage ends once half the squared Newton decrement falls below
/// this, or once the decrement stops shrinking in the pure Newton region
/// (round-off floor).
const CENTERING_TOL: f64 = 1e-6;
/// Below this squared decrement the full Newton step is taken without a search.
const PURE_NEWTON: f64 = 0.1;

/// Log-barrier method on the epigraph form
/// `min s + lambda sum(v)` subject to `||x - y|| <= s` and `|D4 x| <= v`.
///
/// For fixed `x` the barrier problem is minimised over `s` and `v` in closed
/// form, which leaves the smooth function
/// `psi(||x - y||; tau) + sum_i psi(w_i; tau lambda)` with `w = D4 x` and
/// `psi(r; a) = 1 + R - ln(2 (1 + R)) - 2 ln a`, `R = sqrt(1 + a^2 r^2)`.
/// Newton steps on it need one banded factorisation plus a rank-one
/// correction. A centred point has duality gap exactly `degree / tau`, which
/// is the stopping test against `tolerance` times the objective.
fn barrier(y: &[f64], lambda: f64, opts: &TvrjOptions) -> Barrier {
    let n = y.len();
    let k = n - 4;
    let degree = 2.0 + 2.0 * k as f64;

    let mut x = y.to_vec();
    let mut w = vec![0.0; k];
    apply_d4(&x, &mut w);
    let f_start = objective(y, &x, lambda);
    let mut tau = degree / f_start;

    let mut best_f = f_start;
    let mut best_x = x.clone();
    let mut trace = Vec::new();
    let mut steps = 0;

    let mut e = vec![0.0; n];
    let mut curv = vec![0.0; k];
    let mut slope_w = vec![0.0; k];
    let mut grad = vec![0.0; n];
    let mut dw = vec![0.0; k];
    let mut x_new = vec![0.0; n];
    let mut w_new = vec![0.0; k];

    loop {
        let a = tau * lambda;
        let mut prev_dec2 = f64::INFINITY;
        loop {
            for i in 0..n {
                e[i] = x[i] - y[i];
            }
            let ee = dot(&e, &e);
            let r0 = (1.0 + tau * tau * ee).sqrt();
            let diag = tau * tau / (1.0 + r0);
            let rank_one = -tau.powi(4) / (r0 * (1.0 + r0).powi(2));
            for i in 0..k {
                let r = (1.0 + (a * w[i]).powi(2)).sqrt();
                slope_w[i] = a * a * w[i] / (1.0 + r);
                curv[i] = a * a / (r * (1.0 + r));
            }
            apply_d4t(&slope_w, &mut grad);
            for i in 0..n {
                grad[i] += diag * e[i];
            }
            let Some(chol) = weighted_d4_gram(n, diag, &curv).cholesky() else {
                break;
            };
            let mut dx: Vec<f64> = grad.iter().map(|g| -g).collect();
            chol.solve_in_place(&mut dx);
            if ee > 0.0 {
                let mut be = e.clone();
                chol.solve_in_place(&mut be);
                let coef = rank_one * dot(&e, &dx) / (1.0 + rank_one * dot(&e, &be));
                for i in 0..n {
                    dx[i] -= coef * be[i];
                }
            }
            let dec2 = -dot(&grad, &dx);
            if !(dec2 > 0.0) || dec2 / 2.0 <= CENTERING_TOL || (dec2 < PURE_NEWTON && dec2 > 0.5 * prev_dec2) {
                break;
            }
            prev_dec2 = dec2;
            apply_d4(&dx, &mut dw);

            let mut t = 1.0;
            if dec2 > PURE_NEWTON {
                let f0 = smoothed(tau, a, y, &x, &w);
                loop {
                    for i in 0..n {
                        x_new[i] = x[i] + t * dx[i];
                    }
                    for i in 0..k {
                        w_new[i] = w[i] + t * dw[i];
                    }
                    if smoothed(tau, a, y, &x_new, &w_new) <= f0 - 0.25 * t * dec2 {
                        break;
                    }
                    t *= 0.5;
                    if t < 1e-12 {
                        break;
                    }
                }
            }
            for i in 0..n {
                x[i] += t * dx[i];
            }
            apply_d4(&x, &mut w);
            steps += 1;

            let f = objective(y, &x, lambda);
            if f < best_f {
                best_f = f;
                best_x.copy_from_slice(&x);
            }
            if opts.record_objective {
                trace.push(best_f);
            }
            if steps >= opts.max_iterations || t < 1e-12 {
                break;
            }
        }

        let gap = degree / tau;
        if gap <= opts.tolerance * best_f {
            return Barrier { x: best_x, converged: true, iterations: steps, gap, objective: trace };
        }
        if steps >= opts.max_iterations || !tau.is_finite() {
            return Barrier { x: best_x, converged: false, iterations: steps, gap, objective: trace };
        }
        tau *= BARRIER_GROWTH;
    }
}

/// Barrier objective with `s` and `v` minimised out, up to a constant.
fn smoothed(tau: f64, a: f64, y: &[f64], x: &[f64], w: &[f64]) -> f64 {
    let ee: f64 = y.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum();
    let psi = |r: f64| r - (2.0 * (1.0 + r)).ln();
    let mut total = psi((1.0 + tau * tau * ee).sqrt());
    for wi in w {
        total += psi((1.0 + (a * wi).powi(2)).sqrt());
    }
    total
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
