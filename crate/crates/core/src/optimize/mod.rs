//! Ground-truth-free parameter selection.
//!
//! The loss of a derivative candidate `d` on data `y` is
//!
//! ```text
//! L = rmse(trapz(d) + mu, y) + gamma * TV(d),    mu = mean(y - trapz(d))
//! ```
//!
//! where `mu` is the integration constant that best aligns the integral with
//! the data. [`optimize_params`] minimises `L` over a method's parameters with
//! multi-start Nelder-Mead.

pub mod gamma;
pub mod nelder_mead;
pub mod search;

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::calculus::{trapz, tv};
use crate::error::{Error, Result};
use crate::methods::{differentiate, Method, MethodParams};
use crate::metrics::rmse_unchecked;
use crate::series::{DerivativeEstimate, TimeSeries};

pub use gamma::{
    fit_gamma_model, gamma_from_heuristic, suggest_gamma, suggest_gamma_with, GammaFit, GammaModel,
    GammaObservation, GammaSuggestion,
};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use search::SearchSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// RMSE between the aligned integral and the data.
    pub fidelity: f64,
    /// Total variation of the derivative, before weighting.
    pub smoothness: f64,
    /// Constant added to the integral.
    pub mu: f64,
    pub gamma: f64,
}

pub fn loss(dxdt: &[f64], series: &TimeSeries, gamma: f64) -> Result<LossBreakdown> {
    let y = series.values();
    if dxdt.len() != y.len() {
        return Err(Error::invalid(format!(
            "candidate has {} samples, series has {}",
            dxdt.len(),
            y.len()
        )));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be non-negative, got {gamma}")));
    }
    let mut x = trapz(dxdt, series.dt(), 0.0);
    let mu = y.iter().zip(&x).map(|(a, b)| a - b).sum::<f64>() / y.len() as f64;
    x.iter_mut().for_each(|v| *v += mu);
    let fidelity = rmse_unchecked(&x, y);
    let smoothness = tv(dxdt);
    Ok(LossBreakdown { total: fidelity + gamma * smoothness, fidelity, smoothness, mu, gamma })
}

/// Outcome of one Nelder-Mead run.
#[derive(Debug, Clone, PartialEq)]
pub struct StartRecord {
    pub initial: MethodParams,
    /// `+inf` when the method failed at the seed.
    pub initial_loss: f64,
    pub params: MethodParams,
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub best_params: MethodParams,
    pub best_loss: LossBreakdown,
    pub estimate: DerivativeEstimate,
    pub starts: Vec<StartRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub nelder_mead: NelderMeadOptions,
    /// Run the starts on the rayon pool. The result does not depend on it.
    pub parallel: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self { nelder_mead: NelderMeadOptions::default(), parallel: true }
    }
}

/// Minimise the loss over `method`'s parameters from each seed (the default
/// seeds of [`SearchSpace`] when `seeds` is `None`).
///
/// The best start wins; ties go to the earlier seed.
pub fn optimize_params(
    method: Method,
    series: &TimeSeries,
    gamma: f64,
    seeds: Option<&[MethodParams]>,
) -> Result<OptimizationResult> {
    optimize_params_with(method, series, gamma, seeds, &OptimizeOptions::default())
}

pub fn optimize_params_with(
    method: Method,
    series: &TimeSeries,
    gamma: f64,
    seeds: Option<&[MethodParams]>,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    optimize_params_cached(method, &LossCache::new(series), gamma, seeds, opts)
}

/// As [`optimize_params_with`], reusing method outputs stored in `cache`
/// from earlier runs on the same series (for instance at another `gamma`).
pub fn optimize_params_cached(
    method: Method,
    cache: &LossCache<'_>,
    gamma: f64,
    seeds: Option<&[MethodParams]>,
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be non-negative, got {gamma}")));
    }
    let series = cache.series;
    let space = SearchSpace::new(method, series)?;
    let seeds: Vec<MethodParams> = match seeds {
        Some(s) if s.is_empty() => return Err(Error::invalid("seed list is empty")),
        Some(s) => s.to_vec(),
        None => space.default_seeds().to_vec(),
    };
    let starts: Vec<Vec<f64>> = seeds.iter().map(|s| space.encode(s)).collect::<Result<_>>()?;
    let steps = space.steps();

    let run = |x0: &Vec<f64>| -> StartRecord {
        // Seeds given by the caller are evaluated as decoded, so the record
        // shows the point the simplex actually started from.
        let initial = space.decode(x0).expect("encoded seeds decode");
        let initial_loss = cache.total(&initial, gamma);
        let objective = |c: &[f64]| match space.decode(c) {
            Ok(p) => cache.total(&p, gamma),
            Err(_) => f64::INFINITY,
        };
        let r = nelder_mead(objective, x0, &steps, &opts.nelder_mead);
        let params = space.decode(&r.x).expect("simplex vertices decode");
        StartRecord {
            initial,
            initial_loss,
            params,
            loss: r.f,
            iterations: r.iterations,
            evaluations: r.evaluations,
            converged: r.converged,
        }
    };
    let records: Vec<StartRecord> = if opts.parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };

    let best = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.loss.is_finite())
        .min_by(|(i, a), (j, b)| a.loss.total_cmp(&b.loss).then(i.cmp(j)))
        .map(|(_, r)| r.params);
    let Some(best_params) = best else {
        let detail: Vec<String> = records
            .iter()
            .map(|r| format!("{} -> {}", r.initial, r.loss))
            .collect();
        return Err(Error::OptimizationFailed(format!(
            "no start produced a finite loss for {method}: {}",
            detail.join(", ")
        )));
    };

    let estimate = differentiate(series, &best_params)?;
    let best_loss = loss(&estimate.dxdt_hat, series, gamma)?;
    debug_assert!(records.iter().all(|r| best_loss.total <= r.loss && best_loss.total <= r.initial_loss));
    Ok(OptimizationResult { best_params, best_loss, estimate, starts: records })
}

/// Fidelity and smoothness by parameter set for one series. Both are
/// independent of `gamma`, so one cache serves a whole gamma sweep.
pub struct LossCache<'a> {
    series: &'a TimeSeries,
    /// `None` marks a failed solve.
    values: Mutex<HashMap<(u8, u64, u64, u64), Option<(f64, f64)>>>,
}

impl<'a> LossCache<'a> {
    pub fn new(series: &'a TimeSeries) -> Self {
        Self { series, values: Mutex::new(HashMap::new()) }
    }

    pub fn series(&self) -> &TimeSeries {
        self.series
    }

    pub fn len(&self) -> usize {
        self.values.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Loss total at `gamma`, `+inf` when the method fails. Bit-identical to
    /// [`loss`] on the method's output.
    pub fn total(&self, params: &MethodParams, gamma: f64) -> f64 {
        let key = params.cache_key();
        let cached = self.values.lock().expect("cache lock").get(&key).copied();
        let parts = match cached {
            Some(v) => v,
            None => {
                let v = differentiate(self.series, params)
                    .and_then(|e| loss(&e.dxdt_hat, self.series, 0.0))
                    .ok()
                    .map(|l| (l.fidelity, l.smoothness));
                self.values.lock().expect("cache lock").insert(key, v);
                v
            }
        };
        match parts {
            Some((fidelity, smoothness)) => {
                let t = fidelity + gamma * smoothness;
                if t.is_finite() {
                    t
                } else {
                    f64::INFINITY
                }
            }
            None => f64::INFINITY,
        }
    }
}
