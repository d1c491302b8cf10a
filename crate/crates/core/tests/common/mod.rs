#![allow(dead_code)]

use proptest::test_runner::{Config, RngSeed};

/// Fixed-seed configuration so failures reproduce across runs and machines.
pub fn config(cases: u32, seed: u64) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(seed), failure_persistence: None, ..Config::default() }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}
