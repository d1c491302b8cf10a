mod common;

use common::config;
use numdiff::optimize::LossBreakdown;
use numdiff::synthetic::*;
use numdiff::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn kind() -> impl Strategy<Value = ProblemKind> {
    prop_oneof![
        (0.1f64..5.0, 0.1f64..10.0).prop_map(|(freq, amplitude)| ProblemKind::Sine { freq, amplitude }),
        proptest::collection::vec((0.1f64..5.0, 0.1f64..2.0), 1..4)
            .prop_map(|components| ProblemKind::SumOfSines { components }),
        (0.1f64..1.0, 1.0f64..3.0, 0.5f64..2.0)
            .prop_map(|(start_freq, end_freq, amplitude)| ProblemKind::Triangle { start_freq, end_freq, amplitude }),
        Just(ProblemKind::Logistic),
        Just(ProblemKind::Lorenz),
        Just(ProblemKind::PiControl),
    ]
}

fn problem_config() -> impl Strategy<Value = ProblemConfig> {
    (prop_oneof![Just(0.01f64), Just(0.02), Just(0.05)], 1.0f64..6.0, 0.0f64..0.5, any::<u64>()).prop_map(
        |(dt, duration, sigma, seed)| ProblemConfig { dt, duration, noise: Noise::Absolute(sigma), seed },
    )
}

fn sine_problem(sigma: f64, seed: u64) -> SyntheticProblem {
    let cfg = ProblemConfig { dt: 0.01, duration: 4.0, noise: Noise::Relative(sigma), seed };
    generate(&ProblemKind::Sine { freq: 1.0, amplitude: 1.0 }, &cfg).unwrap()
}

fn record(ec: f64, rmse: f64) -> SweepRecord {
    SweepRecord {
        params: SavGolParams::new(5, 2, 1).unwrap().into(),
        gamma: None,
        metrics: EvalMetrics { rmse, error_correlation: ec, correlation_degenerate: false },
        loss: LossBreakdown { total: 0.0, fidelity: 0.0, smoothness: 0.0, mu: 0.0, gamma: 0.0 },
    }
}

fn dominated(r: &[SweepRecord], i: usize) -> bool {
    let a = &r[i].metrics;
    r.iter().any(|b| b.metrics.rmse < a.rmse && b.metrics.error_correlation < a.error_correlation)
}

proptest! {
    #![proptest_config(config(128, 41))]

    #[test]
    fn generation_is_a_pure_function_of_its_inputs(k in kind(), cfg in problem_config()) {
        let a = generate(&k, &cfg).unwrap();
        let b = generate(&k, &cfg).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.noisy.len(), cfg.len());
        prop_assert_eq!(a.truth_x.len(), a.noisy.len());
        prop_assert_eq!(a.truth_dxdt.len(), a.noisy.len());
        if a.noise_sigma > 0.0 {
            let other = generate(&k, &ProblemConfig { seed: cfg.seed.wrapping_add(1), ..cfg }).unwrap();
            prop_assert_ne!(other.noisy.values(), a.noisy.values());
            prop_assert_eq!(other.truth_x, a.truth_x);
        }
    }

    #[test]
    fn noise_is_centred(k in kind(), cfg in problem_config()) {
        let p = generate(&k, &cfg).unwrap();
        let m = p.noisy.len() as f64;
        let mean = p.noisy.values().iter().zip(&p.truth_x).map(|(y, x)| y - x).sum::<f64>() / m;
        prop_assert!(mean.abs() <= 4.0 * p.noise_sigma / m.sqrt() + 1e-12);
    }

    #[test]
    fn truth_evaluates_to_zero_error(k in kind(), cfg in problem_config()) {
        let p = generate(&k, &cfg).unwrap();
        let exact = DerivativeEstimate::new(p.truth_x.clone(), p.truth_dxdt.clone()).unwrap();
        let m = evaluate(&exact, &p).unwrap();
        prop_assert_eq!(m.rmse, 0.0);
        prop_assert_eq!(m.error_correlation, 0.0);
        prop_assert!(m.correlation_degenerate);
    }

    #[test]
    fn front_members_are_never_dominated(points in proptest::collection::vec((0.0f64..1.0, 0.0f64..10.0), 1..80)) {
        let r: Vec<SweepRecord> = points.iter().map(|&(e, s)| record(e, s)).collect();
        let front = pareto_front(&r);
        prop_assert!(!front.is_empty());
        for &i in &front {
            prop_assert!(!dominated(&r, i));
        }
        // Every point is matched or beaten by some front member.
        for x in &r {
            prop_assert!(front.iter().any(|&i| r[i].metrics.rmse <= x.metrics.rmse
                && r[i].metrics.error_correlation <= x.metrics.error_correlation));
        }
    }
}

// Lightest settings: a 3-point quadratic Savitzky-Golay fit, a first-order
// filter just below Nyquist, a Kalman model that trusts every sample, and an
// unpenalised TVRJ.
fn lightest(dt: f64, scale: f64) -> [MethodParams; 4] {
    [
        SavGolParams::new(3, 2, 1).unwrap().into(),
        ButterworthParams::new(1, 0.99 * 0.5 / dt).unwrap().into(),
        KalmanParams::new(1e6 * scale * scale / dt.powi(5), 1e-12 * scale * scale).unwrap().into(),
        TvrjParams::new(0.0).unwrap().into(),
    ]
}

proptest! {
    #![proptest_config(config(100, 42))]

    // Bound: the RMSE of the forward difference of the noiseless truth.
    #[test]
    fn lightest_smoothing_is_near_the_discretisation_error(
        k in prop_oneof![
            (0.2f64..3.0).prop_map(|freq| ProblemKind::Sine { freq, amplitude: 1.0 }),
            Just(ProblemKind::Logistic),
            Just(ProblemKind::Lorenz),
        ],
        dt in prop_oneof![Just(0.001f64), Just(0.005), Just(0.01)],
        duration in 2.0f64..8.0,
    ) {
        let cfg = ProblemConfig { dt, duration, noise: Noise::Absolute(0.0), seed: 0 };
        let p = generate(&k, &cfg).unwrap();
        let fd = finite_difference(&p.truth_x, dt).unwrap();
        let bound = rmse(&fd, &p.truth_dxdt).unwrap();
        for params in lightest(dt, amplitude(&p.truth_x)) {
            let est = differentiate(&p.noisy, &params).unwrap();
            let err = evaluate(&est, &p).unwrap().rmse;
            prop_assert!(err <= 10.0 * bound, "{params:?}: {err} vs bound {bound}");
        }
    }
}

#[test]
fn constant_estimate_is_fully_correlated() {
    let p = sine_problem(0.0, 0);
    let mean = p.truth_dxdt.iter().sum::<f64>() / p.truth_dxdt.len() as f64;
    let est = DerivativeEstimate::new(p.truth_x.clone(), vec![mean; p.truth_dxdt.len()]).unwrap();
    assert!((evaluate(&est, &p).unwrap().error_correlation - 1.0).abs() < 1e-12);
}

#[test]
fn white_noise_error_is_uncorrelated() {
    let cfg = ProblemConfig { dt: 0.001, duration: 10.0, noise: Noise::Absolute(0.0), seed: 0 };
    let p = generate(&ProblemKind::Sine { freq: 1.0, amplitude: 1.0 }, &cfg).unwrap();
    assert_eq!(p.noisy.len(), 10_000);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let n = Normal::new(0.0, 1.0).unwrap();
    let noisy: Vec<f64> = p.truth_dxdt.iter().map(|v| v + n.sample(&mut rng)).collect();
    let est = DerivativeEstimate::new(p.truth_x.clone(), noisy).unwrap();
    assert!(evaluate(&est, &p).unwrap().error_correlation < 0.01);
}

#[test]
fn evaluation_rejects_length_mismatch() {
    let p = sine_problem(0.0, 0);
    let est = DerivativeEstimate::new(vec![0.0; 10], vec![0.0; 10]).unwrap();
    assert!(matches!(evaluate(&est, &p), Err(Error::InvalidInput(_))));
}

#[test]
fn single_point_sweep_is_one_optimisation() {
    let p = sine_problem(0.05, 3);
    let sweep = gamma_sweep(Method::SavGol, &p, &[0.3]).unwrap();
    assert_eq!(sweep.len(), 1);
    let direct = optimize_params(Method::SavGol, &p.noisy, 0.3, None).unwrap();
    assert_eq!(sweep[0].params, direct.best_params);
    assert_eq!(sweep[0].gamma, Some(0.3));
    assert_eq!(sweep[0].loss, direct.best_loss);
    assert_eq!(sweep[0].metrics, evaluate(&direct.estimate, &p).unwrap());
}

#[test]
fn sweep_rejects_bad_grids() {
    let p = sine_problem(0.05, 3);
    assert!(gamma_sweep(Method::SavGol, &p, &[]).is_err());
    assert!(gamma_sweep(Method::SavGol, &p, &[1.0, 0.5]).is_err());
    assert!(gamma_sweep(Method::SavGol, &p, &[0.0, 1.0]).is_err());
}

#[test]
fn sweep_smooths_more_as_gamma_grows() {
    let p = sine_problem(0.05, 4);
    let sweep = gamma_sweep(Method::SavGol, &p, &logspace(-4.0, 4.0, 17)).unwrap();
    let falling = sweep.windows(2).filter(|w| w[1].loss.smoothness <= w[0].loss.smoothness).count();
    assert!(falling as f64 >= 0.9 * (sweep.len() - 1) as f64, "{falling} of {}", sweep.len() - 1);
}

// The loss is only a proxy for the ground-truth RMSE, so whether a sweep
// touches the brute-force envelope varies with the noise draw; six of
// these eight draws do.
#[test]
fn sweeps_usually_reach_the_brute_force_front() {
    let reached = (0..8)
        .filter(|&seed| {
            let p = sine_problem(0.05, seed);
            let sweep = gamma_sweep(Method::SavGol, &p, &logspace(-4.0, 4.0, 33)).unwrap();
            let brute = brute_force_grid(&p, &default_savgol_grid(p.noisy.len())).unwrap();
            sweep.iter().any(|r| {
                front_rmse_at(&brute, r.metrics.error_correlation, 0.05).is_some_and(|f| r.metrics.rmse <= 1.5 * f)
            })
        })
        .count();
    assert!(reached >= 4, "{reached} of 8");
}

#[test]
fn brute_force_recovers_a_quadratic() {
    let dt = 0.01;
    let m = 200;
    let t: Vec<f64> = (0..m).map(|k| k as f64 * dt).collect();
    let problem = SyntheticProblem {
        kind: ProblemKind::Logistic,
        noisy: TimeSeries::new(t.iter().map(|t| 1.0 + 2.0 * t - 3.0 * t * t).collect(), dt).unwrap(),
        truth_x: t.iter().map(|t| 1.0 + 2.0 * t - 3.0 * t * t).collect(),
        truth_dxdt: t.iter().map(|t| 2.0 - 6.0 * t).collect(),
        noise_sigma: 0.0,
        seed: 0,
    };
    let one = brute_force_grid(&problem, &[SavGolParams::new(7, 2, 1).unwrap().into()]).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].gamma, None);

    let mut grid = Vec::new();
    for w in [5, 9] {
        for p in [1, 2] {
            for s in [1, 3] {
                grid.push(SavGolParams::new(w, p, s).unwrap().into());
            }
        }
    }
    let records = brute_force_grid(&problem, &grid).unwrap();
    assert_eq!(records.len(), 8);
    for r in &records {
        let MethodParams::SavGol(sg) = r.params else { unreachable!() };
        if sg.polyorder() >= 2 && sg.smooth_window() == 1 {
            assert!(r.metrics.rmse <= 1e-9, "{sg:?}: {}", r.metrics.rmse);
        }
    }
    let best = records.iter().map(|r| r.metrics.rmse).fold(f64::INFINITY, f64::min);
    assert!(best <= 1e-9);
}

fn training(durations: Vec<f64>) -> TrainingConfig {
    TrainingConfig {
        freqs: vec![1.0],
        dts: vec![0.01],
        noise_fractions: vec![0.05],
        durations,
        gamma_grid: TrainingConfig::default_gamma_grid(),
        seed: 1,
    }
}

#[test]
fn one_combination_gives_one_observation_inside_the_grid() {
    let cfg = training(vec![4.0]);
    let obs = heuristic_training_sweep(&cfg).unwrap();
    assert_eq!(obs.len(), 1);
    let g = obs[0].gamma;
    assert!(g >= cfg.gamma_grid[0] && g <= *cfg.gamma_grid.last().unwrap());
    assert_eq!(cfg.gamma_grid[obs[0].gamma_index], g);
}

// Single elbows jitter by a couple of grid steps between noise draws, so
// the comparison is between averages over draws.
#[test]
fn series_length_does_not_move_the_elbow() {
    let (mut short, mut long) = (0.0, 0.0);
    let draws = 10;
    for seed in 0..draws {
        let mut cfg = training(vec![4.0, 25.0]);
        cfg.seed = 100 * seed + 1;
        let obs = heuristic_training_sweep(&cfg).unwrap();
        assert_eq!(obs.len(), 2);
        short += obs[0].gamma_index as f64 / draws as f64;
        long += obs[1].gamma_index as f64 / draws as f64;
    }
    assert!((short - long).abs() <= 1.0, "mean elbow index {short} at 4 s, {long} at 25 s");
}

#[test]
fn periods_longer_than_the_record_are_skipped() {
    let mut cfg = training(vec![4.0]);
    cfg.freqs = vec![0.1, 1.0];
    let obs = heuristic_training_sweep(&cfg).unwrap();
    assert_eq!(obs.len(), 1);
    assert_eq!(obs[0].freq, 1.0);
}
