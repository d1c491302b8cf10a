//! Synthetic problems with known derivatives, and the sweeps that score
//! parameter choices against them.
//!
//! | kind        | truth                                                      |
//! |-------------|------------------------------------------------------------|
//! | sine        | `A sin(2 pi f t)`                                          |
//! | sum of sines| sum of `A_i sin(2 pi f_i t)`                               |
//! | triangle    | piecewise linear between `-A` and `A`, frequency rising linearly from `f0` to `f1` |
//! | logistic    | `K / (1 + (K/x0 - 1) e^{-r t})`, `K = 1`, `x0 = 0.01`, `r = 1` |
//! | lorenz      | first state of the Lorenz system, `sigma = 10`, `rho = 28`, `beta = 8/3`, start `(5, 5, 5)` |
//! | pi-control  | position of `x'' = -b x' + u + D sin(2 pi f_d t)` under `u = Kp (V - x) + Ki int (V - x)` |
//!
//! The two ODE problems are integrated with Dormand-Prince 5(4) at tolerance
//! `1e-10`, and their derivative is the right-hand side at the stored state.
//! Noise is `sigma * N(0, 1)` from a `ChaCha8` stream seeded with `seed`,
//! one draw per sample in time order.

pub mod ode;
pub mod sweep;

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub use sweep::{
    brute_force_grid, brute_force_grid_against, default_savgol_grid, elbow, evaluate, front_rmse_at, gamma_sweep,
    gamma_sweep_against, heuristic_training_sweep,
    logspace, pareto_front, SweepRecord, TrainingConfig, TrainingObservation,
};

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_RHO: f64 = 28.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;
pub const LORENZ_START: [f64; 3] = [5.0, 5.0, 5.0];

pub const LOGISTIC_CAPACITY: f64 = 1.0;
pub const LOGISTIC_START: f64 = 0.01;
pub const LOGISTIC_RATE: f64 = 1.0;

/// Plant damping `b`.
pub const PI_DAMPING: f64 = 2.0;
pub const PI_KP: f64 = 4.0;
pub const PI_KI: f64 = 2.0;
/// Set point `V`.
pub const PI_SETPOINT: f64 = 1.0;
/// Disturbance amplitude `D` and frequency `f_d`.
pub const PI_DISTURBANCE: f64 = 0.5;
pub const PI_DISTURBANCE_FREQ: f64 = 0.5;

const ODE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Sine { freq: f64, amplitude: f64 },
    /// `(frequency, amplitude)` pairs.
    SumOfSines { components: Vec<(f64, f64)> },
    Triangle { start_freq: f64, end_freq: f64, amplitude: f64 },
    Logistic,
    Lorenz,
    PiControl,
}

impl ProblemKind {
    pub const NAMES: [&'static str; 6] = ["sine", "sum-of-sines", "triangle", "logistic", "lorenz", "pi-control"];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Sine { .. } => "sine",
            ProblemKind::SumOfSines { .. } => "sum-of-sines",
            ProblemKind::Triangle { .. } => "triangle",
            ProblemKind::Logistic => "logistic",
            ProblemKind::Lorenz => "lorenz",
            ProblemKind::PiControl => "pi-control",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses a kind name with its default shape: a 1 Hz unit sine, sines at
/// 1, 3.1 and 7.3 Hz with amplitudes 1, 0.5 and 0.25, and a unit triangle
/// rising from 0.5 to 2 Hz.
impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sine" => ProblemKind::Sine { freq: 1.0, amplitude: 1.0 },
            "sum-of-sines" | "sines" => ProblemKind::SumOfSines { components: vec![(1.0, 1.0), (3.1, 0.5), (7.3, 0.25)] },
            "triangle" => ProblemKind::Triangle { start_freq: 0.5, end_freq: 2.0, amplitude: 1.0 },
            "logistic" => ProblemKind::Logistic,
            "lorenz" => ProblemKind::Lorenz,
            "pi-control" | "pi" => ProblemKind::PiControl,
            other => {
                return Err(Error::invalid(format!(
                    "unknown problem kind '{other}' (expected one of {})",
                    ProblemKind::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Standard deviation in signal units.
    Absolute(f64),
    /// Fraction of the truth's amplitude, half its peak-to-peak range.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub dt: f64,
    pub duration: f64,
    pub noise: Noise,
    pub seed: u64,
}

impl ProblemConfig {
    /// Number of samples, `round(duration / dt)`.
    pub fn len(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    pub kind: ProblemKind,
    pub noisy: TimeSeries,
    pub truth_x: Vec<f64>,
    pub truth_dxdt: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticProblem {
    pub fn dt(&self) -> f64 {
        self.noisy.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        self.noisy.times()
    }
}

/// Half the peak-to-peak range.
pub fn amplitude(x: &[f64]) -> f64 {
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    0.5 * (hi - lo)
}

pub fn generate(kind: &ProblemKind, config: &ProblemConfig) -> Result<SyntheticProblem> {
    let dt = config.dt;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(config.duration.is_finite() && config.duration >= 4.0 * dt) {
        return Err(Error::invalid(format!(
            "duration {} must be at least four time steps",
            config.duration
        )));
    }
    let level = match config.noise {
        Noise::Absolute(s) | Noise::Relative(s) => s,
    };
    if !(level.is_finite() && level >= 0.0) {
        return Err(Error::invalid(format!("noise level must be non-negative, got {level}")));
    }
    let m = config.len();
    let t: Vec<f64> = (0..m).map(|k| k as f64 * dt).collect();
    let (truth_x, truth_dxdt) = truth(kind, &t)?;

    let noise_sigma = match config.noise {
        Noise::Absolute(s) => s,
        Noise::Relative(f) => f * amplitude(&truth_x),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let y: Vec<f64> = truth_x
        .iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + noise_sigma * z
        })
        .collect();
    Ok(SyntheticProblem {
        kind: kind.clone(),
        noisy: TimeSeries::new(y, dt)?,
        truth_x,
        truth_dxdt,
        noise_sigma,
        seed: config.seed,
    })
}

fn truth(kind: &ProblemKind, t: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let positive = |v: f64, what: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("{what} must be positive, got {v}")))
        }
    };
    match kind {
        ProblemKind::Sine { freq, amplitude } => {
            positive(*freq, "frequency")?;
            Ok(sines(&[(*freq, *amplitude)], t))
        }
        ProblemKind::SumOfSines { components } => {
            if components.is_empty() {
                return Err(Error::invalid("sum of sines needs at least one component"));
            }
            for (f, _) in components {
                positive(*f, "frequency")?;
            }
            Ok(sines(components, t))
        }
        ProblemKind::Triangle { start_freq, end_freq, amplitude } => {
            positive(*start_freq, "start frequency")?;
            positive(*end_freq, "end frequency")?;
            let duration = t.len() as f64 * (t[1] - t[0]);
            Ok(triangle(*start_freq, *end_freq, *amplitude, duration, t))
        }
        ProblemKind::Logistic => {
            let (k, r, x0) = (LOGISTIC_CAPACITY, LOGISTIC_RATE, LOGISTIC_START);
            let x: Vec<f64> = t.iter().map(|&s| k / (1.0 + (k / x0 - 1.0) * (-r * s).exp())).collect();
            let d = x.iter().map(|&v| r * v * (1.0 - v / k)).collect();
            Ok((x, d))
        }
        ProblemKind::Lorenz => {
            let states = ode::integrate(lorenz_rhs, 0.0, &LORENZ_START, t, ODE_TOL)?;
            let x = states.iter().map(|s| s[0]).collect();
            let d = states.iter().map(|s| lorenz_rhs(0.0, s)[0]).collect();
            Ok((x, d))
        }
        ProblemKind::PiControl => {
            let states = ode::integrate(pi_rhs, 0.0, &[0.0, 0.0, 0.0], t, ODE_TOL)?;
            let x = states.iter().map(|s| s[0]).collect();
            let d = states.iter().map(|s| s[1]).collect();
            Ok((x, d))
        }
    }
}

fn sines(components: &[(f64, f64)], t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let x = t
        .iter()
        .map(|&s| components.iter().map(|(f, a)| a * (TAU * f * s).sin()).sum())
        .collect();
    let d = t
        .iter()
        .map(|&s| components.iter().map(|(f, a)| a * TAU * f * (TAU * f * s).cos()).sum())
        .collect();
    (x, d)
}

/// Triangle with cycle count `phi(t) = f0 t + (f1 - f0) t^2 / (2T)`. It moves
/// linearly from `-A` to `A` and back between successive half-integer values
/// of `phi`, so the derivative is constant on each half cycle.
fn triangle(f0: f64, f1: f64, amp: f64, duration: f64, t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c = (f1 - f0) / duration;
    let phase = |s: f64| f0 * s + 0.5 * c * s * s;
    // Time at which phi reaches `p`.
    let time_of = |p: f64| {
        if c.abs() < 1e-15 {
            p / f0
        } else {
            (-f0 + (f0 * f0 + 2.0 * c * p).sqrt()) / c
        }
    };
    let mut x = Vec::with_capacity(t.len());
    let mut d = Vec::with_capacity(t.len());
    for &s in t {
        let j = (2.0 * phase(s)).floor();
        let (a, b) = (time_of(0.5 * j), time_of(0.5 * (j + 1.0)));
        let rising = j as i64 % 2 == 0;
        let slope = 2.0 * amp / (b - a);
        let frac = 2.0 * amp * (s - a) / (b - a);
        if rising {
            x.push(-amp + frac);
            d.push(slope);
        } else {
            x.push(amp - frac);
            d.push(-slope);
        }
    }
    (x, d)
}

pub fn lorenz_rhs(_t: f64, s: &[f64]) -> Vec<f64> {
    vec![
        LORENZ_SIGMA * (s[1] - s[0]),
        s[0] * (LORENZ_RHO - s[2]) - s[1],
        s[0] * s[1] - LORENZ_BETA * s[2],
    ]
}

/// State `(x, v, z)` with `z` the integrated tracking error.
pub fn pi_rhs(t: f64, s: &[f64]) -> Vec<f64> {
    let e = PI_SETPOINT - s[0];
    let u = PI_KP * e + PI_KI * s[2];
    vec![s[1], -PI_DAMPING * s[1] + u + PI_DISTURBANCE * (TAU * PI_DISTURBANCE_FREQ * t).sin(), e]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dt: f64, duration: f64, sigma: f64, seed: u64) -> ProblemConfig {
        ProblemConfig { dt, duration, noise: Noise::Absolute(sigma), seed }
    }

    fn all_kinds() -> Vec<ProblemKind> {
        ProblemKind::NAMES.iter().map(|n| n.parse().unwrap()).collect()
    }

    #[test]
    fn noiseless_sine_is_analytic() {
        let p = generate(&"sine".parse().unwrap(), &config(0.01, 2.0, 0.0, 0)).unwrap();
        assert_eq!(p.truth_x.len(), 200);
        for (k, d) in p.truth_dxdt.iter().enumerate() {
            assert_eq!(*d, TAU * (TAU * (k as f64 * 0.01)).cos());
        }
        assert_eq!(p.noisy.values(), &p.truth_x[..]);
    }

    #[test]
    fn triangle_derivative_is_piecewise_constant() {
        let p = generate(&"triangle".parse().unwrap(), &config(0.001, 4.0, 0.0, 0)).unwrap();
        let x = &p.truth_x;
        assert!(x.iter().all(|v| v.abs() <= 1.0 + 1e-12));
        let mut changes = 0;
        for k in 1..x.len() {
            let d = &p.truth_dxdt;
            if d[k] != d[k - 1] {
                changes += 1;
            } else {
                // Inside a half cycle the samples lie on one line.
                assert!((x[k] - x[k - 1] - d[k] * 0.001).abs() < 1e-9, "k={k}");
            }
        }
        // 0.5 Hz rising to 2 Hz over 4 s is 5 cycles, 10 half cycles.
        assert!((9..=10).contains(&changes), "{changes}");
        let slopes = |range: std::ops::Range<usize>| {
            p.truth_dxdt[range].iter().fold(0.0f64, |a, v| a.max(v.abs()))
        };
        assert!(slopes(3000..4000) > slopes(0..1000), "frequency rises");
    }

    #[test]
    fn logistic_matches_its_ode() {
        let p = generate(&ProblemKind::Logistic, &config(0.01, 10.0, 0.0, 0)).unwrap();
        let d = crate::calculus::forward_difference(&p.truth_x, 0.01);
        for k in 0..p.truth_x.len() - 1 {
            let mid = 0.5 * (p.truth_dxdt[k] + p.truth_dxdt[k + 1]);
            assert!((d[k] - mid).abs() < 1e-5);
        }
        assert!(p.truth_x[0] == LOGISTIC_START);
    }

    #[test]
    fn lorenz_derivative_is_consistent_with_its_trajectory() {
        let dt = 0.01;
        let p = generate(&ProblemKind::Lorenz, &config(dt, 10.0, 0.0, 0)).unwrap();
        // Simpson's rule over pairs of steps: x[k+2] - x[k] = dt/3 (d0 + 4 d1 + d2) + O(dt^5).
        let (x, d) = (&p.truth_x, &p.truth_dxdt);
        let mut worst = 0.0f64;
        for k in 0..x.len() - 2 {
            let simpson = dt / 3.0 * (d[k] + 4.0 * d[k + 1] + d[k + 2]);
            worst = worst.max((x[k + 2] - x[k] - simpson).abs());
        }
        assert!(worst < 1e-4, "{worst}");
        assert!(amplitude(x) > 10.0, "chaotic excursion");
    }

    #[test]
    fn pi_control_settles_near_setpoint() {
        let p = generate(&ProblemKind::PiControl, &config(0.01, 30.0, 0.0, 0)).unwrap();
        let tail = &p.truth_x[2000..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        assert!((mean - PI_SETPOINT).abs() < 0.05, "{mean}");
        assert!(amplitude(tail) > 0.01, "disturbance is visible");
    }

    #[test]
    fn generation_is_deterministic_and_seeded() {
        for kind in all_kinds() {
            let a = generate(&kind, &config(0.01, 3.0, 0.1, 7)).unwrap();
            let b = generate(&kind, &config(0.01, 3.0, 0.1, 7)).unwrap();
            let c = generate(&kind, &config(0.01, 3.0, 0.1, 8)).unwrap();
            assert_eq!(a, b, "{kind}");
            assert_ne!(a.noisy, c.noisy, "{kind}");
            assert_eq!(a.truth_x, c.truth_x, "{kind}");
        }
    }

    #[test]
    fn relative_noise_scales_with_amplitude() {
        let cfg = ProblemConfig { dt: 0.01, duration: 2.0, noise: Noise::Relative(0.05), seed: 1 };
        let p = generate(&ProblemKind::Sine { freq: 1.0, amplitude: 3.0 }, &cfg).unwrap();
        assert!((p.noise_sigma - 0.15).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_configs() {
        let sine = ProblemKind::Sine { freq: 1.0, amplitude: 1.0 };
        assert!(generate(&sine, &config(0.0, 1.0, 0.0, 0)).is_err());
        assert!(generate(&sine, &config(0.1, 0.3, 0.0, 0)).is_err());
        assert!(generate(&sine, &config(0.1, 1.0, -1.0, 0)).is_err());
        assert!(generate(&ProblemKind::Sine { freq: 0.0, amplitude: 1.0 }, &config(0.1, 1.0, 0.0, 0)).is_err());
        assert!("spiral".parse::<ProblemKind>().is_err());
    }
}
