//! Scoring parameter choices against ground truth.

use rayon::prelude::*;

use super::{generate, Noise, ProblemConfig, ProblemKind, SyntheticProblem};
use crate::error::{Error, Result};
use crate::methods::{differentiate, Method, MethodParams, SavGolParams};
use crate::metrics::EvalMetrics;
use crate::optimize::{loss, optimize_params_cached, GammaObservation, LossBreakdown, LossCache, OptimizeOptions};
use crate::series::{DerivativeEstimate, TimeSeries};

/// One scored parameter choice.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub params: MethodParams,
    /// Loss weight the parameters were optimised for; `None` for grid points.
    pub gamma: Option<f64>,
    pub metrics: EvalMetrics,
    /// Loss at `gamma`, or at zero for grid points.
    pub loss: LossBreakdown,
}

pub fn evaluate(estimate: &DerivativeEstimate, problem: &SyntheticProblem) -> Result<EvalMetrics> {
    EvalMetrics::compute(&estimate.dxdt_hat, &problem.truth_dxdt)
}

/// `n` points `10^e` with exponents evenly spaced over `[a, b]`.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![10f64.powf(a)],
        _ => (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect(),
    }
}

/// Optimised parameters and their metrics for each `gamma`, in grid order.
///
/// From the second point on, the previous optimum is added as a fifth seed,
/// which keeps the path continuous when the loss surface is multimodal.
pub fn gamma_sweep(method: Method, problem: &SyntheticProblem, gamma_grid: &[f64]) -> Result<Vec<SweepRecord>> {
    gamma_sweep_against(method, &problem.noisy, &problem.truth_dxdt, gamma_grid)
}

/// [`gamma_sweep`] for measured data with a known derivative `truth_dxdt`.
pub fn gamma_sweep_against(
    method: Method,
    series: &TimeSeries,
    truth_dxdt: &[f64],
    gamma_grid: &[f64],
) -> Result<Vec<SweepRecord>> {
    if truth_dxdt.len() != series.len() {
        return Err(Error::invalid(format!(
            "truth has {} samples, series has {}",
            truth_dxdt.len(),
            series.len()
        )));
    }
    if gamma_grid.is_empty() {
        return Err(Error::invalid("gamma grid is empty"));
    }
    if gamma_grid.windows(2).any(|w| w[1] <= w[0]) || gamma_grid.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::invalid("gamma grid must be positive and strictly ascending"));
    }
    let defaults = crate::optimize::SearchSpace::new(method, series)?.default_seeds().to_vec();
    let cache = LossCache::new(series);
    let opts = OptimizeOptions::default();
    let mut out: Vec<SweepRecord> = Vec::with_capacity(gamma_grid.len());
    for &gamma in gamma_grid {
        let seeds = match out.last() {
            Some(prev) => {
                let mut s = defaults.clone();
                s.push(prev.params);
                Some(s)
            }
            None => None,
        };
        let r = optimize_params_cached(method, &cache, gamma, seeds.as_deref(), &opts)?;
        let metrics = EvalMetrics::compute(&r.estimate.dxdt_hat, truth_dxdt)?;
        out.push(SweepRecord { params: r.best_params, gamma: Some(gamma), metrics, loss: r.best_loss });
    }
    Ok(out)
}

/// Every grid point, scored in parallel and returned in grid order.
pub fn brute_force_grid(problem: &SyntheticProblem, grid: &[MethodParams]) -> Result<Vec<SweepRecord>> {
    brute_force_grid_against(&problem.noisy, &problem.truth_dxdt, grid)
}

/// [`brute_force_grid`] for measured data with a known derivative.
pub fn brute_force_grid_against(
    series: &TimeSeries,
    truth_dxdt: &[f64],
    grid: &[MethodParams],
) -> Result<Vec<SweepRecord>> {
    if truth_dxdt.len() != series.len() {
        return Err(Error::invalid(format!(
            "truth has {} samples, series has {}",
            truth_dxdt.len(),
            series.len()
        )));
    }
    grid.par_iter()
        .map(|p| {
            let est = differentiate(series, p)?;
            Ok(SweepRecord {
                params: *p,
                gamma: None,
                metrics: EvalMetrics::compute(&est.dxdt_hat, truth_dxdt)?,
                loss: loss(&est.dxdt_hat, series, 0.0)?,
            })
        })
        .collect()
}

/// A 27 x 7 x 29 = 5481 point Savitzky-Golay grid for `m` samples.
///
/// Windows are 27 odd sizes spaced logarithmically from 9 to about `m/2`;
/// polynomial orders are 1 to 7; smoothing windows are 1 and 28 odd sizes
/// from 3 to about `m/2`. Short series give fewer distinct sizes.
pub fn default_savgol_grid(m: usize) -> Vec<MethodParams> {
    let top = (m / 2).max(9);
    let windows = odd_logspace(9, top, 27);
    let mut smooth = vec![1];
    smooth.extend(odd_logspace(3, top, 28));
    smooth.dedup();
    let mut grid = Vec::with_capacity(windows.len() * 7 * smooth.len());
    for &w in &windows {
        for p in 1..=7 {
            for &s in &smooth {
                if let Ok(params) = SavGolParams::new(w, p, s) {
                    if w <= m && s <= m {
                        grid.push(params.into());
                    }
                }
            }
        }
    }
    grid
}

/// `n` distinct odd integers spread logarithmically over `[lo, hi]`, where
/// possible.
fn odd_logspace(lo: usize, hi: usize, n: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi.max(lo) as f64).ln());
    let mut out: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        let v = (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp();
        let mut odd = 2 * ((v - 1.0) / 2.0).round() as usize + 1;
        if let Some(&last) = out.last() {
            odd = odd.max(last + 2);
        }
        out.push(odd);
    }
    out.retain(|&w| w <= hi.max(lo) || w == lo);
    out
}

/// Indices of records not strictly dominated in (error correlation, RMSE).
pub fn pareto_front(records: &[SweepRecord]) -> Vec<usize> {
    let key = |r: &SweepRecord| (r.metrics.error_correlation, r.metrics.rmse);
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (key(&records[i]), key(&records[j]));
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(i.cmp(&j))
    });
    let mut front = Vec::new();
    let mut best_rmse = f64::INFINITY;
    let mut best_at = (f64::NAN, f64::NAN);
    for i in order {
        let (ec, rmse) = key(&records[i]);
        // Equal to the current best in both metrics is not dominated.
        if rmse < best_rmse || (ec, rmse) == best_at {
            front.push(i);
            if rmse < best_rmse {
                best_rmse = rmse;
                best_at = (ec, rmse);
            }
        }
    }
    front.sort_unstable();
    front
}

/// Lower envelope of the grid at correlation `ec`: the lowest RMSE among
/// records whose error correlation is within `tolerance` of `ec`. `None`
/// when no record falls in that band.
pub fn front_rmse_at(grid: &[SweepRecord], ec: f64, tolerance: f64) -> Option<f64> {
    grid.iter()
        .filter(|r| (r.metrics.error_correlation - ec).abs() <= tolerance)
        .map(|r| r.metrics.rmse)
        .min_by(f64::total_cmp)
}

/// Index of the lower-left corner of a gamma sweep.
///
/// The sweep is read as a path in `gamma` order and cut at its first
/// minimum-RMSE point; everything after it is worse in both metrics, and
/// keeping that oversmoothing cliff would make its corner the sharpest
/// bend. Error correlation and `ln rmse` are min-max normalised over the
/// kept part. The corner is the interior point with the largest signed
/// Menger curvature, positive for a left turn, which is how a path that
/// first drops in RMSE and then runs right in correlation bends. Without
/// any left turn, the point nearest the normalised origin is returned.
pub fn elbow(records: &[SweepRecord]) -> Option<usize> {
    let end = records
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.metrics.rmse.total_cmp(&b.metrics.rmse).then(i.cmp(j)))?
        .0;
    let pts = normalised(&records[..=end]);
    let mut best: Option<(usize, f64)> = None;
    for i in 1..pts.len().saturating_sub(1) {
        let k = menger(pts[i - 1], pts[i], pts[i + 1]);
        if k > 0.0 && best.is_none_or(|(_, b)| k > b) {
            best = Some((i, k));
        }
    }
    if let Some((i, _)) = best {
        return Some(i);
    }
    pts.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (a.0.hypot(a.1)).total_cmp(&b.0.hypot(b.1)))
        .map(|(i, _)| i)
}

fn normalised(records: &[SweepRecord]) -> Vec<(f64, f64)> {
    let scale = |v: Vec<f64>| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        v.into_iter().map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 }).collect::<Vec<_>>()
    };
    let ec = scale(records.iter().map(|r| r.metrics.error_correlation).collect());
    let rmse = scale(records.iter().map(|r| r.metrics.rmse.max(f64::MIN_POSITIVE).ln()).collect());
    ec.into_iter().zip(rmse).collect()
}

fn menger(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    let (ux, uy) = (b.0 - a.0, b.1 - a.1);
    let (vx, vy) = (c.0 - b.0, c.1 - b.1);
    let (wx, wy) = (c.0 - a.0, c.1 - a.1);
    let denom = ux.hypot(uy) * vx.hypot(vy) * wx.hypot(wy);
    if denom == 0.0 {
        0.0
    } else {
        2.0 * (ux * vy - uy * vx) / denom
    }
}

/// Grids for the sinusoid experiments that calibrate the gamma heuristic.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub freqs: Vec<f64>,
    pub dts: Vec<f64>,
    /// Noise standard deviations as fractions of the unit amplitude.
    pub noise_fractions: Vec<f64>,
    pub durations: Vec<f64>,
    /// Ascending loss weights swept for each combination.
    pub gamma_grid: Vec<f64>,
    pub seed: u64,
}

impl TrainingConfig {
    /// Loss weights `10^-4 .. 10^2` at quarter-decade steps.
    pub fn default_gamma_grid() -> Vec<f64> {
        logspace(-4.0, 2.0, 25)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingObservation {
    pub freq: f64,
    pub dt: f64,
    pub noise_fraction: f64,
    pub duration: f64,
    /// Gamma at the elbow of the sweep.
    pub gamma: f64,
    pub gamma_index: usize,
}

impl From<TrainingObservation> for GammaObservation {
    fn from(o: TrainingObservation) -> Self {
        GammaObservation { freq: o.freq, dt: o.dt, gamma: o.gamma }
    }
}

/// Elbow gamma of a Savitzky-Golay sweep for every combination of unit sine
/// frequency, time step, noise level and duration whose period is shorter
/// than the duration and whose frequency is below Nyquist. Combination `i` (in frequency, dt, noise, duration
/// order) uses noise seed `seed + i`.
pub fn heuristic_training_sweep(config: &TrainingConfig) -> Result<Vec<TrainingObservation>> {
    let c = config;
    if c.freqs.is_empty() || c.dts.is_empty() || c.noise_fractions.is_empty() || c.durations.is_empty() {
        return Err(Error::invalid("every training grid needs at least one value"));
    }
    let mut combos = Vec::new();
    for &freq in &c.freqs {
        for &dt in &c.dts {
            for &noise in &c.noise_fractions {
                for &duration in &c.durations {
                    combos.push((freq, dt, noise, duration));
                }
            }
        }
    }
    let mut out = Vec::new();
    for (i, &(freq, dt, noise, duration)) in combos.iter().enumerate() {
        if 1.0 / freq >= duration || freq >= 0.5 / dt {
            continue;
        }
        let cfg = ProblemConfig { dt, duration, noise: Noise::Relative(noise), seed: c.seed.wrapping_add(i as u64) };
        let problem = generate(&ProblemKind::Sine { freq, amplitude: 1.0 }, &cfg)?;
        let records = gamma_sweep(Method::SavGol, &problem, &c.gamma_grid)?;
        let k = elbow(&records).expect("sweep is non-empty");
        out.push(TrainingObservation {
            freq,
            dt,
            noise_fraction: noise,
            duration,
            gamma: c.gamma_grid[k],
            gamma_index: k,
        });
    }
    Ok(out)
}
