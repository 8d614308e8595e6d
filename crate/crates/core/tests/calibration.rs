//! Null calibration and power of the shift tests and the Wald baseline on
//! the simulation catalog.

use shiftcov::experiment::{binomial_band, replicate, ReplicateConfig, ReplicateReport, ReplicateTest};
use shiftcov::pointsim::catalog::ModelParams;
use shiftcov::residual::ResidualKind;
use shiftcov::shifttest::{Correction, ShiftTestConfig, TestStatistic};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn run(model: &str, a: Option<f64>, reps: usize, seed: u64, tests: Vec<ReplicateTest>) -> ReplicateReport {
    let cfg = ReplicateConfig {
        model: model.into(),
        params: ModelParams { a, b: None },
        reps,
        seed,
        grid: 128,
        alpha: 0.05,
        band_level: 0.99,
        gibbs_steps: None,
        tests,
    };
    let r = replicate(&cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.failures == 0));
    r
}

fn shift(stat: TestStatistic, corr: Correction, n: usize) -> ReplicateTest {
    ReplicateTest::shift("t", ShiftTestConfig::new(stat, ResidualKind::Nonparametric, corr).with_shifts(n))
}

#[test]
fn cwr_torus_size_on_p1_at_full_scale() {
    let r = run("P1", None, 5000, 51, vec![shift(TestStatistic::Cwr, Correction::Torus, 999)]);
    let f = r.rows[0].fraction;
    assert!((0.0440..=0.0562).contains(&f), "rejection fraction {f}");
}

#[test]
fn partial_tau_variance_on_lgcp_is_not_liberal() {
    let r = run("L1", None, 500, 52, vec![shift(TestStatistic::TauPartial, Correction::Variance, 199)]);
    let hi = binomial_band(500, 0.05, 0.99).unwrap()[1];
    assert!(r.rows[0].fraction <= hi, "rejection fraction {} above {hi}", r.rows[0].fraction);
}

/// Under the null the observed statistic is exchangeable with the shifted
/// ones, so its rank, and with it the p-value, is uniform.
#[test]
fn null_p_values_are_uniform() {
    let r = run("P1", None, 500, 53, vec![shift(TestStatistic::Cwr, Correction::Variance, 99)]);
    let mut counts = [0.0f64; 10];
    for p in r.p_values[0].iter().map(|p| p.unwrap()) {
        // p = k/100 for k = 1..=100; ten ranks per bin
        let k = (p * 100.0).round() as usize;
        counts[(k - 1) / 10] += 1.0;
    }
    let e = 50.0;
    let chi2: f64 = counts.iter().map(|o| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi-square p {p}, counts {counts:?}");
}

#[test]
fn power_grows_with_the_effect() {
    let power: Vec<f64> = [0.0, 0.125, 0.25]
        .into_iter()
        .enumerate()
        .map(|(k, a)| {
            run("P1p", Some(a), 200, 54 + k as u64, vec![shift(TestStatistic::Cwr, Correction::Torus, 99)]).rows[0]
                .fraction
        })
        .collect();
    assert!(power[0] < power[1] && power[1] < power[2], "{power:?}");
}

#[test]
fn wald_test_size_and_liberality() {
    let p1 = run("P1", None, 1000, 57, vec![ReplicateTest::wald("wald")]).rows[0].fraction;
    assert!((p1 - 0.048).abs() <= 0.02, "P1 {p1}");
    let l1 = run("L1", None, 1000, 58, vec![ReplicateTest::wald("wald")]).rows[0].fraction;
    assert!((l1 - 0.268).abs() <= 0.04, "L1 {l1}");
}
