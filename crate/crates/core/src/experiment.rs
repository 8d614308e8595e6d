//! Replication harness: simulate a catalog model many times, run a list of
//! tests on every realization and tabulate rejection fractions.
//!
//! Every replicate draws from its own seed stream, so results do not depend
//! on the order in which worker threads finish.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::geom::{Rect, Window};
use crate::loglin::fit_loglinear;
use crate::pointsim::catalog::{self, ModelParams};
use crate::pointsim::{Realization, Simulator};
use crate::raster::{GridGeometry, ScalarField};
use crate::rng::SeedStream;
use crate::shifttest::{run_shift_test_cached, ShiftTestConfig};
use crate::smooth::SmootherCache;

pub const DEFAULT_GRID: usize = 128;

/// Runs `f` once per replicate with the replicate's own seed stream and
/// returns the results in replicate order.
pub fn replicate_with<T: Send>(
    reps: usize,
    seed: u64,
    f: impl Fn(usize, &SeedStream) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let root = SeedStream::new(seed);
    (0..reps).into_par_iter().map(|i| f(i, &root.child("replicate", i as u64))).collect()
}

/// Equal-tailed binomial interval for the rejection fraction of a test with
/// exact size `p` over `n` replications.
pub fn binomial_band(n: usize, p: f64, level: f64) -> Result<[f64; 2]> {
    if n == 0 || !(0.0..=1.0).contains(&p) || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter("binomial band needs n > 0, p in [0, 1] and level in (0, 1)".into()));
    }
    let d = Binomial::new(p, n as u64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let lo = d.inverse_cdf((1.0 - level) / 2.0);
    let hi = d.inverse_cdf((1.0 + level) / 2.0);
    Ok([lo as f64 / n as f64, hi as f64 / n as f64])
}

fn default_interest() -> String {
    "C2".into()
}
fn default_nuisance() -> Vec<String> {
    vec!["C1".into()]
}
fn default_alpha() -> f64 {
    0.05
}
fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_level() -> f64 {
    0.99
}

/// One test applied to every replicate: either a random-shift test or the
/// Wald test of the log-linear Poisson model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateTest {
    pub label: String,
    #[serde(default = "default_interest")]
    pub interest: String,
    #[serde(default = "default_nuisance")]
    pub nuisance: Vec<String>,
    #[serde(default)]
    pub shift: Option<ShiftTestConfig>,
    #[serde(default)]
    pub wald: bool,
}

impl ReplicateTest {
    pub fn shift(label: &str, config: ShiftTestConfig) -> Self {
        Self { label: label.into(), interest: default_interest(), nuisance: default_nuisance(), shift: Some(config), wald: false }
    }

    pub fn wald(label: &str) -> Self {
        Self { label: label.into(), interest: default_interest(), nuisance: default_nuisance(), shift: None, wald: true }
    }

    fn validate(&self) -> Result<()> {
        if self.shift.is_some() == self.wald {
            return Err(Error::Config(format!("test '{}' must set exactly one of `shift` or `wald`", self.label)));
        }
        Ok(())
    }

    /// p-value on one realization.
    pub fn p_value(&self, real: &Realization<f64>, seed: u64, cache: &SmootherCache<f64>) -> Result<f64> {
        let get = |name: &str| {
            real.covariate(name).ok_or_else(|| Error::Config(format!("model has no covariate named '{name}'")))
        };
        let interest = get(&self.interest)?;
        let nuisance = self.nuisance.iter().map(|n| get(n)).collect::<Result<Vec<&ScalarField<f64>>>>()?;
        match &self.shift {
            Some(cfg) => {
                let mut cfg = cfg.clone();
                cfg.seed = seed;
                Ok(run_shift_test_cached(&real.pattern, &nuisance, interest, &cfg, cache)?.p_value)
            }
            None => {
                let mut covs = nuisance;
                covs.push(interest);
                let fit = fit_loglinear(&real.pattern, &covs, interest)?;
                fit.wald_p(covs.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateConfig {
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Grid columns on the unit square.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Confidence level of the reported binomial bands.
    #[serde(default = "default_level")]
    pub band_level: f64,
    /// Overrides the Metropolis-Hastings step count of Gibbs models.
    #[serde(default)]
    pub gibbs_steps: Option<usize>,
    pub tests: Vec<ReplicateTest>,
}

impl ReplicateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.tests.is_empty() {
            return Err(Error::Config("no tests listed".into()));
        }
        for t in &self.tests {
            t.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionRow {
    pub label: String,
    pub rejections: usize,
    /// Replicates where the test could not be computed; counted as
    /// non-rejections.
    pub failures: usize,
    pub reps: usize,
    pub fraction: f64,
    /// Band around `alpha` for a test of exact size.
    pub band: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateReport {
    pub model: String,
    pub reps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub rows: Vec<RejectionRow>,
    /// `p_values[t][r]`, `None` where test `t` failed on replicate `r`.
    pub p_values: Vec<Vec<Option<f64>>>,
}

impl ReplicateReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("label,rejections,failures,reps,fraction,band_lo,band_hi\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.4},{:.4},{:.4}\n",
                r.label, r.rejections, r.failures, r.reps, r.fraction, r.band[0], r.band[1]
            ));
        }
        out
    }
}

pub fn unit_grid(ncols: usize) -> Result<(GridGeometry<f64>, Window<f64>)> {
    Ok((GridGeometry::tiling(&Rect::unit(), ncols)?, Window::unit_square()))
}

pub fn replicate(config: &ReplicateConfig) -> Result<ReplicateReport> {
    config.validate()?;
    let mut spec = catalog::model(&config.model, config.params)?;
    if let Some(steps) = config.gibbs_steps {
        spec.gibbs.steps = steps;
    }
    let (geom, window) = unit_grid(config.grid)?;
    let sim = Simulator::new(spec, geom, window.clone())?;
    let cache = SmootherCache::new(geom, window);
    let per_rep = replicate_with(config.reps, config.seed, |_, seeds| {
        let real = sim.simulate(&seeds.child("model", 0))?;
        Ok(config
            .tests
            .iter()
            .enumerate()
            .map(|(t, test)| test.p_value(&real, seeds.seed("test", t as u64), &cache).ok())
            .collect::<Vec<_>>())
    })?;
    let band = binomial_band(config.reps, config.alpha, config.band_level)?;
    let mut rows = Vec::new();
    let mut p_values = Vec::new();
    for (t, test) in config.tests.iter().enumerate() {
        let ps: Vec<Option<f64>> = per_rep.iter().map(|r| r[t]).collect();
        let rejections = ps.iter().filter(|p| matches!(p, Some(p) if *p <= config.alpha)).count();
        let failures = ps.iter().filter(|p| p.is_none()).count();
        rows.push(RejectionRow {
            label: test.label.clone(),
            rejections,
            failures,
            reps: config.reps,
            fraction: rejections as f64 / config.reps as f64,
            band,
        });
        p_values.push(ps);
    }
    Ok(ReplicateReport {
        model: sim.spec().name.clone(),
        reps: config.reps,
        alpha: config.alpha,
        seed: config.seed,
        rows,
        p_values,
    })
}
