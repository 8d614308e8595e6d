//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every experiment uses a fixed master seed. Set `ACCEPTANCE_ONLY=3,5` to
//! run a subset. The exit status is zero either way; read the lines.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shiftcov::depmeasure::{
    cwr, kendall_tau, tau_hat, tau_partial, BandwidthChoice, SamplingPoints, DEFAULT_SAMPLING_POINTS,
};
use shiftcov::experiment::{replicate, replicate_with, unit_grid, ReplicateConfig, ReplicateTest};
use shiftcov::geom::{torus_wrap, Point, Rect, ShiftVector, Window};
use shiftcov::pointsim::catalog::{self, ModelParams};
use shiftcov::pointsim::{simulate_gibbs, simulate_poisson, GibbsConfig, Interaction, Simulator};
use shiftcov::randfield::{GaussFieldSpec, GrfSampler};
use shiftcov::raster::{GridGeometry, ScalarField, ShiftMode};
use shiftcov::residual::{IntensityEstimate, ResidualKind};
use shiftcov::select::backward_select;
use shiftcov::shifttest::{monte_carlo_p_value, Correction, ShiftTestConfig, TestStatistic};
use shiftcov::smooth::{Smoother, SmootherCache, KernelSpec};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

type Outcome = (bool, String);

fn shift(stat: TestStatistic, corr: Correction, n: usize) -> ShiftTestConfig {
    ShiftTestConfig::new(stat, ResidualKind::Nonparametric, corr).with_shifts(n)
}

fn run(model: &str, params: ModelParams, reps: usize, seed: u64, tests: Vec<ReplicateTest>) -> Vec<f64> {
    let cfg = ReplicateConfig {
        model: model.into(),
        params,
        reps,
        seed,
        grid: 128,
        alpha: 0.05,
        band_level: 0.99,
        gibbs_steps: None,
        tests,
    };
    let r = replicate(&cfg).expect("replication");
    for row in &r.rows {
        assert_eq!(row.failures, 0, "{}: {} failed replicates", row.label, row.failures);
    }
    r.rows.iter().map(|row| row.fraction).collect()
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&x)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64)
}

fn size_calibration() -> Outcome {
    let p1 = run("P1", ModelParams::default(), 1000, 101, vec![ReplicateTest::shift(
        "cwr n tor",
        shift(TestStatistic::Cwr, Correction::Torus, 999),
    )])[0];
    let l1 = run("L1", ModelParams::default(), 1000, 102, vec![ReplicateTest::shift(
        "cwr n var",
        shift(TestStatistic::Cwr, Correction::Variance, 999),
    )])[0];
    let ok = within(p1, 0.032, 0.068) && within(l1, 0.032, 0.068);
    (ok, format!("P1 CWR n/tor {p1:.3}, L1 CWR n/var {l1:.3}; band [0.032, 0.068]"))
}

fn conservativeness() -> Outcome {
    let params = ModelParams { a: None, b: Some(1.0) };
    let f = run("L1*", params, 1000, 201, vec![ReplicateTest::shift(
        "cwr n var",
        shift(TestStatistic::Cwr, Correction::Variance, 999),
    )])[0];
    (f < 0.035, format!("L1* b=1 CWR n/var {f:.3} (< 0.035)"))
}

fn power_ordering() -> Outcome {
    let params = ModelParams { a: Some(0.25), b: None };
    let f = run("P1p", params, 500, 301, vec![
        ReplicateTest::shift("cwr n tor", shift(TestStatistic::Cwr, Correction::Torus, 199)),
        ReplicateTest::shift("taup n tor", shift(TestStatistic::TauPartial, Correction::Torus, 199)),
    ]);
    let ok = within(f[0], 0.72, 0.86) && within(f[1], 0.14, 0.29) && f[0] > f[1] + 0.3;
    (ok, format!("P1p CWR n/tor {:.3} in [0.72, 0.86], taup n/tor {:.3} in [0.14, 0.29]", f[0], f[1]))
}

fn wald_baseline() -> Outcome {
    let l1 = run("L1", ModelParams::default(), 1000, 401, vec![ReplicateTest::wald("wald")])[0];
    let p1 = run("P1", ModelParams::default(), 1000, 402, vec![ReplicateTest::wald("wald")])[0];
    let ok = within(l1, 0.22, 0.32) && within(p1, 0.032, 0.068);
    (ok, format!("Wald L1 {l1:.3} in [0.22, 0.32], P1 {p1:.3} in [0.032, 0.068]"))
}

fn proposition_variance() -> Outcome {
    let (g, w) = unit_grid(64).unwrap();
    let sampler = GrfSampler::new(GaussFieldSpec::standard(0.1), g, w.clone()).unwrap();
    let mut details = Vec::new();
    let mut ok = true;
    let intensities = [
        ("constant 100", ScalarField::constant(g, w.clone(), 100.0).unwrap()),
        ("200x", ScalarField::from_fn(g, w.clone(), |p: Point<f64>| 200.0 * p.x).unwrap()),
    ];
    for (k, (label, lam)) in intensities.iter().enumerate() {
        let est = IntensityEstimate::supplied(lam.clone());
        let s = replicate_with(10_000, 501 + k as u64, |_, seeds| {
            let c = sampler.sample(&mut seeds.rng("field", 0));
            let x = simulate_poisson(lam, &mut seeds.rng("pattern", 0))?;
            Ok(cwr(&x, &c, &est)?.value)
        })
        .unwrap();
        let target = lam.integral();
        let (_, v) = mean_var(&s);
        ok &= (v / target - 1.0).abs() <= 0.05;
        details.push(format!("{label}: var S {v:.1} vs {target:.1}"));
    }
    (ok, details.join("; "))
}

fn flatness() -> Outcome {
    let spec = catalog::model("L1*", ModelParams { a: None, b: Some(1.0) }).unwrap();
    // the candidate grid is absolute so that the same rule applies on every window
    let candidates: Vec<f64> = (0..8).map(|i| 0.05 * 16f64.powf(i as f64 / 7.0)).collect();
    let mut tau_scaled = Vec::new();
    let mut cwr_scaled = Vec::new();
    for a in [1usize, 2, 3] {
        let rect = Rect::new(0.0, 0.0, a as f64, a as f64).unwrap();
        let g = GridGeometry::tiling(&rect, 64 * a).unwrap();
        let w = Window::Rect(rect);
        let area = (a * a) as f64;
        let sim = Simulator::new(spec.clone(), g, w.clone()).unwrap();
        let cache = SmootherCache::new(g, w.clone());
        let out = replicate_with(500, 600 + a as u64, |_, seeds| {
            let r = sim.simulate(&seeds.child("model", 0))?;
            let (c1, c2) = (r.covariate("C1").unwrap(), r.covariate("C2").unwrap());
            let sp = SamplingPoints::poisson(&w, 100.0 * area, &mut seeds.rng("sampling", 0))?;
            let t = tau_partial(
                &r.pattern,
                &[c1],
                c2,
                ResidualKind::Nonparametric,
                &BandwidthChoice::Adaptive(candidates.clone()),
                &sp,
                &cache,
            )?;
            let est = IntensityEstimate::fit(&r.pattern, &[c1], ResidualKind::Nonparametric, c1)?;
            Ok((t.value, cwr(&r.pattern, c2, &est)?.value))
        })
        .unwrap();
        let taus: Vec<f64> = out.iter().map(|o| o.0).collect();
        let cwrs: Vec<f64> = out.iter().map(|o| o.1).collect();
        tau_scaled.push(mean_var(&taus).1 * area);
        cwr_scaled.push(mean_var(&cwrs).1 / area);
    }
    let ratio = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) / v.iter().cloned().fold(f64::MAX, f64::min);
    let (rt, rc) = (ratio(&tau_scaled), ratio(&cwr_scaled));
    (
        rt <= 1.5 && rc <= 1.5,
        format!(
            "|W| var(taup) {:?} ratio {rt:.2}; var(CWR)/|W| {:?} ratio {rc:.2} (<= 1.5)",
            tau_scaled.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(),
            cwr_scaled.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>()
        ),
    )
}

fn correlation_curves() -> Outcome {
    let (g, w) = unit_grid(64).unwrap();
    let x = ScalarField::from_fn(g, w.clone(), |p: Point<f64>| p.x).unwrap();
    let xy = ScalarField::from_fn(g, w.clone(), |p: Point<f64>| p.x + p.y).unwrap();
    let cache = SmootherCache::new(g, w.clone());
    let wide = Smoother::new(g, w.clone(), KernelSpec::new(0.5).unwrap()).unwrap();
    let grid_a = [-4.0, -2.0, 0.0, 2.0, 4.0];
    let mut tau = Vec::new();
    let mut tau2 = Vec::new();
    let mut taup = Vec::new();
    for (k, &a) in grid_a.iter().enumerate() {
        let norm = if a == 0.0 { 1.0 } else { (f64::exp(a) - 1.0) / a };
        let lam = x.map(|v| 200.0 * (a * v).exp() / norm);
        let out = replicate_with(500, 700 + k as u64, |_, seeds| {
            let pat = simulate_poisson(&lam, &mut seeds.rng("pattern", 0))?;
            let sp = SamplingPoints::uniform(&w, DEFAULT_SAMPLING_POINTS, &mut seeds.rng("sampling", 0));
            let t = tau_hat(&pat, &x, &wide, &sp)?.value;
            let t2 = tau_hat(&pat, &xy, &wide, &sp)?.value;
            let tp = tau_partial(
                &pat,
                &[&x],
                &xy,
                ResidualKind::Nonparametric,
                &BandwidthChoice::Adaptive(Vec::new()),
                &sp,
                &cache,
            )?
            .value;
            Ok((t, t2, tp))
        })
        .unwrap();
        let m = |f: fn(&(f64, f64, f64)) -> f64| out.iter().map(f).sum::<f64>() / out.len() as f64;
        tau.push(m(|o| o.0));
        tau2.push(m(|o| o.1));
        taup.push(m(|o| o.2));
    }
    let monotone = tau.windows(2).all(|p| p[1] > p[0]);
    let ok = tau[2].abs() <= 0.02
        && monotone
        && tau[0] < -0.8
        && tau[4] > 0.8
        && taup.iter().all(|t| t.abs() <= 0.05)
        && tau2[4] > 0.3;
    let r = |v: &[f64]| v.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join(" ");
    (ok, format!("mean tau over a=-4..4: [{}]; mean taup: [{}]; tau(C2) at a=4: {:.3}", r(&tau), r(&taup), tau2[4]))
}

fn brute_kendall(a: &[f64], b: &[f64]) -> f64 {
    let sgn = |x: f64| (x > 0.0) as i64 - (x < 0.0) as i64;
    let n = a.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += sgn(a[i] - a[j]) * sgn(b[i] - b[j]);
            }
        }
    }
    s as f64 / (n * (n - 1)) as f64
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    let mut kendall_ok = true;
    for rep in 0..1000 {
        let n = rng.random_range(2..120);
        let mut a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        // inject ties into both vectors
        for _ in 0..(rep % 7) * n / 10 {
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            a[i] = a[j];
            let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
            b[i] = b[j];
        }
        kendall_ok &= kendall_tau(&a, &b).unwrap() == brute_kendall(&a, &b);
    }

    let r = Rect::new(0.0, 0.0, 2.0, 1.5).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = Point::new(rng.random::<f64>() * 2.0, rng.random::<f64>() * 1.5);
        let v = ShiftVector::new(rng.random::<f64>() * 6.0 - 3.0, rng.random::<f64>() * 6.0 - 3.0).unwrap();
        let back = torus_wrap(torus_wrap(p, v, &r), v.neg(), &r);
        // points on the seam may come back one period away
        let dx = (back.x - p.x).abs().min(2.0 - (back.x - p.x).abs());
        let dy = (back.y - p.y).abs().min(1.5 - (back.y - p.y).abs());
        worst = worst.max(dx.max(dy));
    }
    let g = GridGeometry::tiling(&r, 40).unwrap();
    let f = ScalarField::from_fn(g, Window::Rect(r), |p: Point<f64>| (3.0 * p.x).sin() * p.y).unwrap();
    let v = ShiftVector::new(0.35, -1.1).unwrap();
    let round = f.shift(v, ShiftMode::Torus).unwrap().shift(v.neg(), ShiftMode::Torus).unwrap();
    let field_ok = round.values() == f.values();

    let mut fixtures_ok = true;
    let mut v: Vec<f64> = vec![5.0];
    v.extend((1..20).map(|i| i as f64 / 10.0));
    fixtures_ok &= monte_carlo_p_value(&v).unwrap() == 1.0 / 20.0;
    v[0] = 1.05; // above 10 of 19 replicates, tied with none
    fixtures_ok &= monte_carlo_p_value(&v).unwrap() == 10.0 / 20.0;
    v[0] = -0.5; // |−0.5| is matched by 0.5..1.9: 15 replicates
    fixtures_ok &= monte_carlo_p_value(&v).unwrap() == 16.0 / 20.0;
    v[0] = 0.0;
    fixtures_ok &= monte_carlo_p_value(&v).unwrap() == 1.0;

    (
        kendall_ok && worst <= 1e-12 && field_ok && fixtures_ok,
        format!(
            "kendall fast==brute on 1000 vectors: {kendall_ok}; torus round trip max error {worst:.1e}; \
             field round trip exact: {field_ok}; p-value fixtures: {fixtures_ok}"
        ),
    )
}

fn simulator_fidelity() -> Outcome {
    // lag φ = 10 cells of 0.01
    let (g, w) = unit_grid(100).unwrap();
    let sampler = GrfSampler::new(GaussFieldSpec::standard(0.1), g, w.clone()).unwrap();
    let prods = replicate_with(1000, 901, |_, seeds| {
        let z = sampler.sample(&mut seeds.rng("field", 0));
        let mut s = 0.0;
        let mut n = 0usize;
        for r in 0..100 {
            for c in 0..90 {
                s += z.get(c, r) * z.get(c + 10, r);
                n += 1;
            }
        }
        Ok(s / n as f64)
    })
    .unwrap();
    let corr = prods.iter().sum::<f64>() / prods.len() as f64;
    let corr_ok = (corr - (-1f64).exp()).abs() <= 0.03;

    let lam = ScalarField::constant(g, w.clone(), 100.0).unwrap();
    let counts = replicate_with(5000, 902, |_, s| Ok(simulate_poisson(&lam, &mut s.rng("pattern", 0))?.len() as f64))
        .unwrap();
    let (m, v) = mean_var(&counts);
    let disp_ok = (v / m - 1.0).abs() <= 0.1;

    let spec = catalog::model("H1", ModelParams::default()).unwrap();
    let (g1, w1) = unit_grid(64).unwrap();
    let sim = Simulator::new(spec, g1, w1).unwrap();
    let violations: usize = replicate_with(10_000, 903, |_, seeds| {
        let p = sim.simulate(seeds)?.pattern;
        let pts = p.points();
        let mut bad = 0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if pts[i].dist2(pts[j]) < 0.01 * 0.01 {
                    bad += 1;
                }
            }
        }
        Ok(bad)
    })
    .unwrap()
    .into_iter()
    .sum();

    let beta = ScalarField::constant(g1, Window::unit_square(), 60.0).unwrap();
    let inter = Interaction::Strauss { gamma: 1.0, r: 0.05 };
    let cfg = GibbsConfig::default();
    let sc: Vec<u64> = (0..1000u64)
        .into_par_iter()
        .map(|s| simulate_gibbs(inter, &beta, &cfg, &mut ChaCha8Rng::seed_from_u64(904_000 + s)).unwrap().len() as u64)
        .collect();
    let pois = Poisson::new(60.0).unwrap();
    let edges: Vec<u64> = (40..=80).step_by(4).collect();
    let mut obs = vec![0.0; edges.len() + 1];
    let mut exp = vec![0.0; edges.len() + 1];
    for &c in &sc {
        obs[edges.iter().position(|&e| c < e).unwrap_or(edges.len())] += 1.0;
    }
    for k in 0..400u64 {
        exp[edges.iter().position(|&e| k < e).unwrap_or(edges.len())] += 1000.0 * pois.pmf(k);
    }
    let chi2: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((obs.len() - 1) as f64).unwrap().cdf(chi2);

    (
        corr_ok && disp_ok && violations == 0 && p > 0.01,
        format!(
            "lag-phi corr {corr:.3} vs {:.3}; Poisson dispersion {:.3}; H1 hardcore violations in 10^4 patterns: \
             {violations}; Strauss gamma=1 vs Poisson chi-square p {p:.3}",
            (-1f64).exp(),
            v / m
        ),
    )
}

fn synthetic_replacements() -> Outcome {
    let (g, w) = unit_grid(64).unwrap();
    let sampler = GrfSampler::new(GaussFieldSpec::standard(0.1), g, w.clone()).unwrap();
    let cfg = ShiftTestConfig::new(TestStatistic::Cwr, ResidualKind::Nonparametric, Correction::Torus).with_shifts(199);
    let reps = 200;

    // a covariate driving a Poisson process with unit effect is retained
    let retained = replicate_with(reps, 1001, |_, seeds| {
        let c = sampler.sample(&mut seeds.rng("field", 0));
        let x = simulate_poisson(&c.map(|v| (4.5 + v).exp()), &mut seeds.rng("pattern", 0))?;
        let mut cfg = cfg.clone();
        cfg.seed = seeds.seed("test", 0);
        let t = backward_select(&x, &[("C1".into(), &c)], &cfg, 0.05)?;
        Ok(t.selected.len() == 1)
    })
    .unwrap();
    let kept = retained.iter().filter(|b| **b).count() as f64 / reps as f64;

    // an independent covariate next to CSR is removed
    let csr = ScalarField::constant(g, w.clone(), 5f64.exp()).unwrap();
    let removed = replicate_with(reps, 1002, |_, seeds| {
        let c = sampler.sample(&mut seeds.rng("field", 0));
        let x = simulate_poisson(&csr, &mut seeds.rng("pattern", 0))?;
        let mut cfg = cfg.clone();
        cfg.seed = seeds.seed("test", 0);
        Ok(backward_select(&x, &[("C1".into(), &c)], &cfg, 0.05)?.selected.is_empty())
    })
    .unwrap();
    let dropped = removed.iter().filter(|b| **b).count() as f64 / reps as f64;
    let band = shiftcov::experiment::binomial_band(reps, 0.95, 0.99).unwrap();

    // two covariates, only the first drives the process
    let order = replicate_with(reps, 1003, |_, seeds| {
        let f = sampler.sample_many(2, &mut seeds.rng("field", 0));
        let x = simulate_poisson(&f[0].map(|v| (4.5 + v).exp()), &mut seeds.rng("pattern", 0))?;
        let mut cfg = cfg.clone();
        cfg.seed = seeds.seed("test", 0);
        let t = backward_select(&x, &[("C1".into(), &f[0]), ("C2".into(), &f[1])], &cfg, 0.05)?;
        Ok(t.stages[0].removed.as_deref() == Some("C2") && t.selected == ["C1"])
    })
    .unwrap();
    let right = order.iter().filter(|b| **b).count() as f64 / reps as f64;

    // correlation report: constant covariate and the strong-trend scenario
    let one = ScalarField::constant(g, w.clone(), 1.0).unwrap();
    let x = ScalarField::from_fn(g, w.clone(), |p: Point<f64>| p.x).unwrap();
    let lam = x.map(|v| 200.0 * (4.0 * v).exp() * 4.0 / (4f64.exp() - 1.0));
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let pat = simulate_poisson(&lam, &mut rng).unwrap();
    let sp = SamplingPoints::uniform(&w, DEFAULT_SAMPLING_POINTS, &mut rng);
    let wide = Smoother::new(g, w.clone(), KernelSpec::new(0.5).unwrap()).unwrap();
    let t_const = tau_hat(&pat, &one, &wide, &sp).unwrap().value;
    let t_trend = tau_hat(&pat, &x, &wide, &sp).unwrap().value;

    let ok = kept >= 0.95 && within(dropped, band[0], band[1]) && right > 0.5 && t_const == 0.0 && t_trend > 0.8;
    (
        ok,
        format!(
            "real-data tables replaced by synthetic checks: strong covariate kept {kept:.3} (>= 0.95); \
             independent covariate dropped {dropped:.3} in [{:.3}, {:.3}]; irrelevant C2 removed first and C1 kept \
             {right:.3} (> 0.5); tau constant {t_const}; tau at a=4 {t_trend:.3} (> 0.8)",
            band[0], band[1]
        ),
    )
}

fn main() {
    let only: Option<Vec<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let criteria: Vec<(usize, &str, fn() -> Outcome)> = vec![
        (1, "size calibration, independent covariates", size_calibration),
        (2, "conservativeness under correlated covariates", conservativeness),
        (3, "power ordering", power_ordering),
        (4, "parametric baseline liberality", wald_baseline),
        (5, "variance of the covariate-weighted sum", proposition_variance),
        (6, "variance-correction flatness", flatness),
        (7, "correlation-coefficient curves", correlation_curves),
        (8, "oracle equivalence", oracles),
        (9, "simulator fidelity", simulator_fidelity),
        (10, "non-reproducible content replaced by synthetic checks", synthetic_replacements),
    ];
    let (mut passed, mut ran) = (0, 0);
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        ran += 1;
        passed += ok as usize;
        println!(
            "{} criterion {id} ({name}): {detail} [{:.0}s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    // the PASS/FAIL lines are the report; a failed criterion is a finding, not a crash
    println!("acceptance: {passed}/{ran} criteria pass");
}
