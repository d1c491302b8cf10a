//! Search spaces for each method and their default starting points.
//!
//! Every method is searched in an unconstrained coordinate vector that is
//! decoded to valid parameters:
//!
//! | method       | coordinates                                   |
//! |--------------|-----------------------------------------------|
//! | Butterworth  | order, `ln cutoff`                            |
//! | SavGol       | `ln h`, polynomial order, `ln s` (window `2h+1`, smoothing window `2s+1`) |
//! | Kalman       | `ln q`, `ln r`                                |
//! | TVRJ         | `ln gamma_tv`                                 |
//!
//! Logarithmic coordinates are rounded to six decimals before decoding, so
//! nearby simplex vertices share one parameter set and one cached solve.
//! Integer coordinates are rounded to the nearest integer. Everything is
//! clamped to the bounds below after rounding.
//!
//! Default seeds, four per method from light to heavy smoothing:
//!
//! * Butterworth: `(order, cutoff / Nyquist)` = (2, 0.5), (2, 0.1), (3, 0.02), (4, 0.005).
//! * SavGol: `h = m * {0.005, 0.02, 0.05, 0.15}` with polynomial orders 2, 3, 3, 4 and `s = h`.
//! * Kalman: `r0 = var(second differences) / 6`, the white-noise variance
//!   estimate, and `q = r0 / dt^5 * {1, 1e-4, 1e-8, 1e-12}`.
//! * TVRJ: the lower bound (where the data are returned unchanged) and the
//!   30 %, 55 % and 80 % points of the logarithmic search range.

use crate::error::{Error, Result};
use crate::methods::tvrj::{nontrivial_gamma_range, TvrjOptions};
use crate::methods::{ButterworthParams, KalmanParams, Method, MethodParams, SavGolParams, TvrjParams};
use crate::series::{variance, TimeSeries};

const LOG_DECIMALS: f64 = 1e6;
const MAX_BUTTERWORTH_ORDER: usize = 10;
const MAX_POLYORDER: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Dim {
    /// `exp(c)` on `[lo, hi]`, bounds in coordinate units.
    Log { lo: f64, hi: f64 },
    /// `round(c)` on `[lo, hi]`.
    Int { lo: usize, hi: usize },
    /// `round(exp(c))` on `[lo, hi]`.
    LogInt { lo: usize, hi: usize },
}

impl Dim {
    fn log(lo: f64, hi: f64) -> Self {
        Dim::Log { lo: round_log(lo.ln()), hi: round_log(hi.ln()) }
    }

    fn decode_real(self, c: f64) -> f64 {
        match self {
            Dim::Log { lo, hi } => round_log(c).clamp(lo, hi).exp(),
            _ => unreachable!("integer dimension decoded as real"),
        }
    }

    fn decode_int(self, c: f64) -> usize {
        let v = match self {
            Dim::Int { .. } => c.round(),
            Dim::LogInt { .. } => round_log(c).exp().round(),
            Dim::Log { .. } => unreachable!("real dimension decoded as integer"),
        };
        let (lo, hi) = match self {
            Dim::Int { lo, hi } | Dim::LogInt { lo, hi } => (lo, hi),
            Dim::Log { .. } => unreachable!(),
        };
        if v.is_nan() {
            lo
        } else {
            (v.max(0.0).min(usize::MAX as f64) as usize).clamp(lo, hi)
        }
    }

    fn encode_real(self, v: f64) -> f64 {
        match self {
            Dim::Log { lo, hi } => v.ln().clamp(lo, hi),
            _ => unreachable!(),
        }
    }

    fn encode_int(self, v: usize) -> f64 {
        match self {
            Dim::Int { lo, hi } => v.clamp(lo, hi) as f64,
            Dim::LogInt { lo, hi } => (v.clamp(lo, hi) as f64).max(0.25).ln(),
            Dim::Log { .. } => unreachable!(),
        }
    }

    /// First simplex step.
    fn step(self) -> f64 {
        match self {
            Dim::Log { .. } => 0.5 * std::f64::consts::LN_10,
            Dim::Int { .. } => 1.0,
            Dim::LogInt { .. } => std::f64::consts::LN_2,
        }
    }
}

fn round_log(c: f64) -> f64 {
    (c * LOG_DECIMALS).round() / LOG_DECIMALS
}

/// Coordinates, bounds and default seeds for one method on one series.
#[derive(Debug, Clone)]
pub struct SearchSpace {
    method: Method,
    dims: Vec<Dim>,
    seeds: Vec<MethodParams>,
}

impl SearchSpace {
    pub fn new(method: Method, series: &TimeSeries) -> Result<Self> {
        let m = series.len();
        let dt = series.dt();
        match method {
            Method::Butterworth => {
                let max_order = (m / 3).saturating_sub(1).min(MAX_BUTTERWORTH_ORDER);
                if max_order == 0 {
                    return Err(Error::invalid(format!("{m} samples are too few for Butterworth")));
                }
                let nyq = series.nyquist();
                let lo = (0.1 / (m as f64 * dt)).min(0.01 * nyq);
                let dims = vec![Dim::Int { lo: 1, hi: max_order }, Dim::log(lo, 0.99 * nyq)];
                let mut space = Self { method, dims, seeds: Vec::new() };
                space.seeds = [(2, 0.5), (2, 0.1), (3, 0.02), (4, 0.005)]
                    .iter()
                    .map(|&(order, frac)| space.decode(&[order as f64, (frac * nyq).ln()]))
                    .collect::<Result<_>>()?;
                Ok(space)
            }
            Method::SavGol => {
                let hmax = (m - 1) / 2;
                if hmax == 0 {
                    return Err(Error::invalid(format!("{m} samples are too few for Savitzky-Golay")));
                }
                let dims = vec![
                    Dim::LogInt { lo: 1, hi: hmax },
                    Dim::Int { lo: 1, hi: MAX_POLYORDER },
                    Dim::LogInt { lo: 0, hi: hmax },
                ];
                let mut space = Self { method, dims, seeds: Vec::new() };
                space.seeds = [(0.005, 2), (0.02, 3), (0.05, 3), (0.15, 4)]
                    .iter()
                    .map(|&(frac, p)| {
                        let h = (frac * m as f64).round().max(1.0).ln();
                        space.decode(&[h, p as f64, h])
                    })
                    .collect::<Result<_>>()?;
                Ok(space)
            }
            Method::Kalman => {
                let r0 = noise_variance(series.values());
                let q0 = r0 / dt.powi(5);
                let dims = vec![Dim::log(q0 * 1e-20, q0 * 1e8), Dim::log(r0 * 1e-6, r0 * 1e6)];
                let mut space = Self { method, dims, seeds: Vec::new() };
                space.seeds = [1.0, 1e-4, 1e-8, 1e-12]
                    .iter()
                    .map(|&f| space.decode(&[(q0 * f).ln(), r0.ln()]))
                    .collect::<Result<_>>()?;
                Ok(space)
            }
            Method::Tvrj => {
                let (lo, hi) = match nontrivial_gamma_range(series, &TvrjOptions::default()) {
                    Some((exact, cubic)) if exact > 0.0 && cubic > exact => (0.5 * exact, 2.0 * cubic),
                    Some((exact, _)) if exact > 0.0 => (0.5 * exact, 2.0 * exact),
                    _ => (1e-12, 1.0),
                };
                let dims = vec![Dim::log(lo, hi)];
                let (clo, chi) = match dims[0] {
                    Dim::Log { lo, hi } => (lo, hi),
                    _ => unreachable!(),
                };
                let mut space = Self { method, dims, seeds: Vec::new() };
                space.seeds = [0.0, 0.3, 0.55, 0.8]
                    .iter()
                    .map(|&f| space.decode(&[clo + f * (chi - clo)]))
                    .collect::<Result<_>>()?;
                Ok(space)
            }
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dimension(&self) -> usize {
        self.dims.len()
    }

    /// The four default starting points, light smoothing first.
    pub fn default_seeds(&self) -> &[MethodParams] {
        &self.seeds
    }

    /// Initial simplex steps in coordinate units.
    pub fn steps(&self) -> Vec<f64> {
        self.dims.iter().map(|d| d.step()).collect()
    }

    /// Smallest and largest value of a single logarithmic parameter, such as
    /// `gamma_tv` for TVRJ.
    pub fn log_bounds(&self, index: usize) -> Option<(f64, f64)> {
        match self.dims.get(index)? {
            Dim::Log { lo, hi } => Some((lo.exp(), hi.exp())),
            _ => None,
        }
    }

    pub fn decode(&self, c: &[f64]) -> Result<MethodParams> {
        let d = &self.dims;
        Ok(match self.method {
            Method::Butterworth => {
                ButterworthParams::new(d[0].decode_int(c[0]), d[1].decode_real(c[1]))?.into()
            }
            Method::SavGol => {
                let h = d[0].decode_int(c[0]);
                let p = d[1].decode_int(c[1]).min(2 * h);
                let s = d[2].decode_int(c[2]);
                SavGolParams::new(2 * h + 1, p, 2 * s + 1)?.into()
            }
            Method::Kalman => KalmanParams::new(d[0].decode_real(c[0]), d[1].decode_real(c[1]))?.into(),
            Method::Tvrj => TvrjParams::new(d[0].decode_real(c[0]))?.into(),
        })
    }

    pub fn encode(&self, params: &MethodParams) -> Result<Vec<f64>> {
        let d = &self.dims;
        match (self.method, params) {
            (Method::Butterworth, MethodParams::Butterworth(p)) => {
                Ok(vec![d[0].encode_int(p.order()), d[1].encode_real(p.cutoff())])
            }
            (Method::SavGol, MethodParams::SavGol(p)) => Ok(vec![
                d[0].encode_int(p.window() / 2),
                d[1].encode_int(p.polyorder()),
                d[2].encode_int(p.smooth_window() / 2),
            ]),
            (Method::Kalman, MethodParams::Kalman(p)) => {
                Ok(vec![d[0].encode_real(p.q()), d[1].encode_real(p.r())])
            }
            (Method::Tvrj, MethodParams::Tvrj(p)) => {
                if p.gamma_tv() > 0.0 {
                    Ok(vec![d[0].encode_real(p.gamma_tv())])
                } else {
                    Ok(vec![d[0].encode_real(f64::MIN_POSITIVE)])
                }
            }
            (expected, other) => Err(Error::invalid(format!(
                "seed for {} given to a {expected} search",
                other.method()
            ))),
        }
    }
}

/// White-noise variance estimate from second differences, floored so that
/// smooth or constant data still give a usable scale.
fn noise_variance(y: &[f64]) -> f64 {
    let d2: Vec<f64> = y.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = (1e-12 * scale * scale).max(1e-300);
    (variance(&d2) / 6.0).max(1e-12 * variance(y)).max(floor)
}
