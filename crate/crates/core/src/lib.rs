//! Numerical differentiation of noisy, uniformly sampled time series with
//! automatic parameter selection.
//!
//! Four methods estimate the derivative: a zero-phase Butterworth filter, a
//! Savitzky-Golay fit, a constant-acceleration Kalman smoother, and
//! total-variation regularisation of the jerk. Their parameters are chosen by
//! minimising a loss that needs no ground truth and trades the fidelity of the
//! integrated derivative against its total variation through one weight
//! `gamma`, which in turn follows from the dominant frequency and the time step.

pub mod calculus;
pub mod error;
pub mod methods;
pub mod metrics;
pub mod optimize;
pub mod series;
pub mod spectrum;
pub mod synthetic;

pub use calculus::{finite_difference, gaussian_smooth, total_variation, trapezoidal_integral};
pub use error::{Error, Result};
pub use methods::{
    differentiate, ButterworthParams, KalmanParams, Method, MethodParams, SavGolParams, TvrjParams,
};
pub use metrics::{error_correlation, rmse, EvalMetrics};
pub use optimize::{
    gamma_from_heuristic, loss, optimize_params, suggest_gamma, GammaModel, LossBreakdown, OptimizationResult,
};
pub use series::{DerivativeEstimate, TimeSeries};
pub use spectrum::{estimate_cutoff_frequency, power_spectrum, PowerSpectrum};
