//! The four differentiation methods and their parameter sets.
//!
//! | method       | parameters                         |
//! |--------------|------------------------------------|
//! | Butterworth  | filter order, cutoff frequency     |
//! | Savitzky-Golay | window, polynomial order, smoothing window |
//! | Kalman       | process noise `q`, measurement noise `r` |
//! | TVRJ         | regularization weight              |

mod banded;
pub mod butterworth;
pub mod kalman;
pub mod savgol;
pub mod tvrj;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::series::{DerivativeEstimate, TimeSeries};

pub use butterworth::butterworth_diff;
pub use kalman::{kalman_diff, kalman_filter_only};
pub use savgol::savgol_diff;
pub use tvrj::{tvrj_diff, tvrj_diff_with, TvrjOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Butterworth,
    SavGol,
    Kalman,
    Tvrj,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Butterworth, Method::SavGol, Method::Kalman, Method::Tvrj];

    pub fn name(self) -> &'static str {
        match self {
            Method::Butterworth => "butterworth",
            Method::SavGol => "savgol",
            Method::Kalman => "kalman",
            Method::Tvrj => "tvrj",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "butterworth" => Ok(Method::Butterworth),
            "savgol" | "savitzky-golay" => Ok(Method::SavGol),
            "kalman" => Ok(Method::Kalman),
            "tvrj" => Ok(Method::Tvrj),
            other => Err(Error::invalid(format!(
                "unknown method '{other}' (expected butterworth, savgol, kalman or tvrj)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ButterworthParams {
    order: usize,
    cutoff: f64,
}

impl ButterworthParams {
    pub fn new(order: usize, cutoff: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("Butterworth order must be at least 1"));
        }
        if !(cutoff.is_finite() && cutoff > 0.0) {
            return Err(Error::invalid(format!("cutoff must be positive, got {cutoff}")));
        }
        Ok(Self { order, cutoff })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SavGolParams {
    window: usize,
    polyorder: usize,
    smooth_window: usize,
}

impl SavGolParams {
    pub fn new(window: usize, polyorder: usize, smooth_window: usize) -> Result<Self> {
        if window < 3 || window % 2 == 0 {
            return Err(Error::invalid(format!("window must be odd and >= 3, got {window}")));
        }
        if polyorder < 1 || polyorder >= window {
            return Err(Error::invalid(format!(
                "polynomial order must lie in [1, {}], got {polyorder}",
                window - 1
            )));
        }
        if smooth_window == 0 || smooth_window % 2 == 0 {
            return Err(Error::invalid(format!(
                "smoothing window must be odd and >= 1, got {smooth_window}"
            )));
        }
        Ok(Self { window, polyorder, smooth_window })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn polyorder(&self) -> usize {
        self.polyorder
    }

    pub fn smooth_window(&self) -> usize {
        self.smooth_window
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    q: f64,
    r: f64,
}

impl KalmanParams {
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(q.is_finite() && q > 0.0) || !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("q and r must be positive, got q={q}, r={r}")));
        }
        Ok(Self { q, r })
    }

    /// Spectral density of the white jerk driving the model.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Measurement noise variance.
    pub fn r(&self) -> f64 {
        self.r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvrjParams {
    gamma_tv: f64,
}

impl TvrjParams {
    pub fn new(gamma_tv: f64) -> Result<Self> {
        if !(gamma_tv.is_finite() && gamma_tv >= 0.0) {
            return Err(Error::invalid(format!(
                "regularization weight must be non-negative, got {gamma_tv}"
            )));
        }
        Ok(Self { gamma_tv })
    }

    pub fn gamma_tv(&self) -> f64 {
        self.gamma_tv
    }
}

/// Parameters for one of the four methods.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodParams {
    Butterworth(ButterworthParams),
    SavGol(SavGolParams),
    Kalman(KalmanParams),
    Tvrj(TvrjParams),
}

impl MethodParams {
    pub fn method(&self) -> Method {
        match self {
            MethodParams::Butterworth(_) => Method::Butterworth,
            MethodParams::SavGol(_) => Method::SavGol,
            MethodParams::Kalman(_) => Method::Kalman,
            MethodParams::Tvrj(_) => Method::Tvrj,
        }
    }

    /// Hashable identity of the parameter values (floats by bit pattern).
    pub fn cache_key(&self) -> (u8, u64, u64, u64) {
        match self {
            MethodParams::Butterworth(p) => (0, p.order as u64, p.cutoff.to_bits(), 0),
            MethodParams::SavGol(p) => (1, p.window as u64, p.polyorder as u64, p.smooth_window as u64),
            MethodParams::Kalman(p) => (2, p.q.to_bits(), p.r.to_bits(), 0),
            MethodParams::Tvrj(p) => (3, p.gamma_tv.to_bits(), 0, 0),
        }
    }
}

impl fmt::Display for MethodParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodParams::Butterworth(p) => write!(f, "order={};cutoff={:e}", p.order, p.cutoff),
            MethodParams::SavGol(p) => write!(
                f,
                "window={};polyorder={};smooth_window={}",
                p.window, p.polyorder, p.smooth_window
            ),
            MethodParams::Kalman(p) => write!(f, "q={:e};r={:e}", p.q, p.r),
            MethodParams::Tvrj(p) => write!(f, "gamma_tv={:e}", p.gamma_tv),
        }
    }
}

impl From<ButterworthParams> for MethodParams {
    fn from(p: ButterworthParams) -> Self {
        MethodParams::Butterworth(p)
    }
}

impl From<SavGolParams> for MethodParams {
    fn from(p: SavGolParams) -> Self {
        MethodParams::SavGol(p)
    }
}

impl From<KalmanParams> for MethodParams {
    fn from(p: KalmanParams) -> Self {
        MethodParams::Kalman(p)
    }
}

impl From<TvrjParams> for MethodParams {
    fn from(p: TvrjParams) -> Self {
        MethodParams::Tvrj(p)
    }
}

/// Run whichever method `params` selects.
pub fn differentiate(series: &TimeSeries, params: &MethodParams) -> Result<DerivativeEstimate> {
    match params {
        MethodParams::Butterworth(p) => butterworth_diff(series, p),
        MethodParams::SavGol(p) => savgol_diff(series, p),
        MethodParams::Kalman(p) => kalman_diff(series, p),
        MethodParams::Tvrj(p) => tvrj_diff(series, p),
    }
}
