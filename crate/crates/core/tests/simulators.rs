use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shiftcov::geom::{Rect, Window};
use shiftcov::pointsim::{catalog, simulate_gibbs, simulate_poisson, GibbsConfig, Interaction, Simulator};
use shiftcov::raster::{GridGeometry, ScalarField};
use shiftcov::rng::SeedStream;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn grid(n: usize) -> GridGeometry<f64> {
    GridGeometry::tiling(&Rect::unit(), n).unwrap()
}

fn model_counts(name: &str, reps: u64, n: usize) -> Vec<f64> {
    let spec = catalog::model(name, Default::default()).unwrap();
    let sim = Simulator::new(spec, grid(n), Window::unit_square()).unwrap();
    (0..reps)
        .into_par_iter()
        .map(|s| sim.simulate(&SeedStream::new(1000 + s)).unwrap().pattern.len() as f64)
        .collect()
}

fn mean_var(c: &[f64]) -> (f64, f64) {
    let m = c.iter().sum::<f64>() / c.len() as f64;
    let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (c.len() - 1) as f64;
    (m, v)
}

#[test]
fn lgcp_l1_mean_and_overdispersion() {
    let (m, v) = mean_var(&model_counts("L1", 5000, 64));
    assert!((m - 5f64.exp()).abs() < 3.0, "mean {m}");
    assert!(v / m > 1.5, "dispersion {}", v / m);
}

#[test]
fn lgcp_l2_mean() {
    let (m, _) = mean_var(&model_counts("L2", 5000, 64));
    assert!((m - 5f64.exp()).abs() < 3.0, "mean {m}");
}

#[test]
fn lgcp_with_degenerate_fields_is_poisson() {
    let mut spec = catalog::model("L1", Default::default()).unwrap();
    spec.field.variance = 0.0;
    let sim = Simulator::new(spec, grid(16), Window::unit_square()).unwrap();
    let seeds = SeedStream::new(4);
    let r = sim.simulate(&seeds).unwrap();
    let constant = ScalarField::constant(grid(16), Window::unit_square(), 4f64.exp()).unwrap();
    let direct = simulate_poisson(&constant, &mut seeds.rng("pattern", 0)).unwrap();
    assert_eq!(r.pattern.points(), direct.points());
}

#[test]
fn strauss_s1_mean_near_target() {
    let (m, _) = mean_var(&model_counts("S1", 1000, 64));
    assert!((m / 5f64.exp() - 1.0).abs() < 0.05, "mean {m}");
}

#[test]
fn gamma_one_sampler_count_is_poisson() {
    let beta = ScalarField::constant(grid(32), Window::unit_square(), 60.0).unwrap();
    let inter = Interaction::Strauss { gamma: 1.0, r: 0.05 };
    let cfg = GibbsConfig::default();
    let counts: Vec<u64> = (0..1000u64)
        .into_par_iter()
        .map(|s| simulate_gibbs(inter, &beta, &cfg, &mut ChaCha8Rng::seed_from_u64(s)).unwrap().len() as u64)
        .collect();
    let pois = Poisson::new(60.0).unwrap();
    // pooled classes with expected count >= 5 under Poisson(60)
    let edges: Vec<u64> = (40..=80).step_by(4).collect();
    let mut obs = vec![0.0; edges.len() + 1];
    let mut exp = vec![0.0; edges.len() + 1];
    for &c in &counts {
        let k = edges.iter().position(|&e| c < e).unwrap_or(edges.len());
        obs[k] += 1.0;
    }
    for k in 0..400u64 {
        let bin = edges.iter().position(|&e| k < e).unwrap_or(edges.len());
        exp[bin] += 1000.0 * pois.pmf(k);
    }
    let chi2: f64 = obs.iter().zip(&exp).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new((obs.len() - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2} p {p}");
}
