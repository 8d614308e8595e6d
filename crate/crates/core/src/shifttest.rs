//! Random-shift Monte Carlo tests of dependence between a point pattern and
//! a covariate of interest, with torus or variance correction.
//!
//! The residual object is built once from the pattern and the nuisance
//! covariates; only the covariate of interest is shifted. Shift vectors are
//! snapped to whole grid cells, so `(Ψ + v)(u) = Ψ(u − v)` is a pure index
//! offset on the raster.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depmeasure::{
    informative, kendall_tau, partial_residual_field, BandwidthChoice, SamplingPoints, DEFAULT_SAMPLING_POINTS,
};
use crate::error::{Error, Result};
use crate::geom::{default_shift_radius, draw_disc, torus_wrap, Point, PointPattern, Rect, ShiftVector, Window};
use crate::raster::{ScalarField, ShiftCorrelation, ShiftMode};
use crate::residual::{residual_measure, IntensityEstimate, ResidualKind};
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use crate::smooth::SmootherCache;

pub const MIN_SHIFTS: usize = 19;
pub const DEFAULT_SHIFTS: usize = 999;
/// Redraws allowed per requested shift before giving up.
const MAX_REDRAWS_PER_SHIFT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatistic {
    TauPartial,
    Cwr,
    MeanCovariate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Torus,
    Variance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDistribution {
    /// Uniform on the disc of the configured radius.
    #[default]
    Disc,
    /// Uniform on the whole (rectangular) window; torus correction only.
    Window,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
}

fn default_residuals() -> ResidualKind {
    ResidualKind::Nonparametric
}
fn default_shifts() -> usize {
    DEFAULT_SHIFTS
}
fn default_bandwidth_choice() -> BandwidthChoice {
    BandwidthChoice::Adaptive(Vec::new())
}
fn default_sampling() -> usize {
    DEFAULT_SAMPLING_POINTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftTestConfig {
    pub statistic: TestStatistic,
    #[serde(default = "default_residuals")]
    pub residuals: ResidualKind,
    pub correction: Correction,
    #[serde(default = "default_shifts")]
    pub n_shifts: usize,
    /// Disc radius; `None` means the largest radius keeping a quarter of a
    /// rectangular window in every overlap.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub shift_distribution: ShiftDistribution,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alternative: Alternative,
    /// Smoothing bandwidth of the residual field for τ̂ₚ.
    #[serde(default = "default_bandwidth_choice")]
    pub bandwidth: BandwidthChoice,
    /// Number of uniform sampling points for τ̂ₚ.
    #[serde(default = "default_sampling")]
    pub sampling_points: usize,
}

impl ShiftTestConfig {
    pub fn new(statistic: TestStatistic, residuals: ResidualKind, correction: Correction) -> Self {
        Self {
            statistic,
            residuals,
            correction,
            n_shifts: DEFAULT_SHIFTS,
            radius: None,
            shift_distribution: ShiftDistribution::Disc,
            seed: 0,
            alternative: Alternative::TwoSided,
            bandwidth: default_bandwidth_choice(),
            sampling_points: DEFAULT_SAMPLING_POINTS,
        }
    }

    pub fn with_shifts(mut self, n: usize) -> Self {
        self.n_shifts = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = Some(r);
        self
    }

    pub fn with_bandwidth(mut self, b: BandwidthChoice) -> Self {
        self.bandwidth = b;
        self
    }

    pub fn validate<F: Scalar>(&self, window: &Window<F>) -> Result<()> {
        if self.n_shifts < MIN_SHIFTS {
            return Err(Error::Config(format!("n_shifts must be at least {MIN_SHIFTS}, got {}", self.n_shifts)));
        }
        if let Some(r) = self.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("shift radius must be positive, got {r}")));
            }
        }
        if self.correction == Correction::Torus && !window.is_rect() {
            return Err(Error::Config("torus correction needs a rectangular window".into()));
        }
        if self.shift_distribution == ShiftDistribution::Window && self.correction != Correction::Torus {
            return Err(Error::Config("shifts uniform on the window need the torus correction".into()));
        }
        if self.statistic == TestStatistic::TauPartial && self.sampling_points < 2 {
            return Err(Error::Config("at least two sampling points are needed".into()));
        }
        match &self.bandwidth {
            BandwidthChoice::Fixed(b) if !(*b > 0.0 && b.is_finite()) => {
                Err(Error::Config(format!("bandwidth must be positive, got {b}")))
            }
            BandwidthChoice::Adaptive(c) if c.iter().any(|b| !(*b > 0.0 && b.is_finite())) => {
                Err(Error::Config("candidate bandwidths must be positive".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn resolved_radius<F: Scalar>(&self, window: &Window<F>) -> Result<f64> {
        match self.radius {
            Some(r) => Ok(r),
            None => Ok(default_shift_radius(window)?.as_f64()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftTestResult {
    /// `T₀`, the statistic for the unshifted covariate.
    pub observed: f64,
    /// `T₀, T₁, …, T_N`.
    pub statistics: Vec<f64>,
    /// `S₀, …, S_N` under the variance correction; the values ranked under
    /// the torus correction otherwise.
    pub standardized: Vec<f64>,
    /// Snapped shift vectors, the zero vector first.
    pub shifts: Vec<[f64; 2]>,
    /// `|W_i|` on the grid.
    pub areas: Vec<f64>,
    /// Points (or sampling points for τ̂ₚ) in `W_i`.
    pub retained: Vec<usize>,
    /// Shifts discarded because `W_i` held too little data.
    pub redraws: usize,
    pub p_value: f64,
    pub radius: Option<f64>,
    pub bandwidth: Option<f64>,
    /// Raised when the nonparametric residual mass exceeds its tolerance.
    pub mass_flag: bool,
    pub config: ShiftTestConfig,
}

/// `(1 + #{i ≥ 1 : |s_i| ≥ |s_0|}) / (N + 1)`, ties counted as extreme.
pub fn monte_carlo_p_value(values: &[f64]) -> Result<f64> {
    let (s0, rest) = values.split_first().ok_or(Error::TooFewObservations(0))?;
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::UndefinedStatistic("NaN among the shift statistics".into()));
    }
    let hits = rest.iter().filter(|s| s.abs() >= s0.abs()).count();
    Ok((1 + hits) as f64 / values.len() as f64)
}

/// `(T_i − T̄) / √f_i` with `T̄` the mean over all `N + 1` values.
pub fn standardize(t: &[f64], factors: &[f64]) -> Result<Vec<f64>> {
    if t.len() != factors.len() {
        return Err(Error::LengthMismatch(t.len(), factors.len()));
    }
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    Ok(t.iter().zip(factors).map(|(v, f)| (v - mean) / f.sqrt()).collect())
}

/// The p-value consumed by backward selection.
pub fn backward_input_adapter(result: &ShiftTestResult) -> f64 {
    result.p_value
}

/// Where `u − v` falls for a shift `v`.
struct Shifter<'a, F: Scalar> {
    window: &'a Window<F>,
    torus: Option<Rect<F>>,
}

impl<F: Scalar> Shifter<'_, F> {
    /// `Some(u − v)` when it lies in the (torus or Euclidean) window.
    fn back(&self, u: Point<F>, v: ShiftVector<F>) -> Option<Point<F>> {
        match &self.torus {
            Some(r) => Some(torus_wrap(u, v.neg(), r)),
            None => {
                let q = u.translate(v.neg());
                self.window.contains(q).then_some(q)
            }
        }
    }
}

enum Phi<F: Scalar> {
    Cwr { integral: ShiftCorrelation<F> },
    Mean,
    Tau { sampling: Vec<Point<F>>, residual: Vec<f64> },
}

pub fn run_shift_test<F: Scalar>(
    pattern: &PointPattern<F>,
    nuisance: &[&ScalarField<F>],
    interest: &ScalarField<F>,
    config: &ShiftTestConfig,
) -> Result<ShiftTestResult> {
    let cache = SmootherCache::new(*interest.geom(), pattern.window().clone());
    run_shift_test_cached(pattern, nuisance, interest, config, &cache)
}

/// As [`run_shift_test`], reusing smoothers across calls on the same grid.
pub fn run_shift_test_cached<F: Scalar>(
    pattern: &PointPattern<F>,
    nuisance: &[&ScalarField<F>],
    interest: &ScalarField<F>,
    config: &ShiftTestConfig,
    cache: &SmootherCache<F>,
) -> Result<ShiftTestResult> {
    let window = pattern.window();
    config.validate(window)?;
    let geom = *interest.geom();
    if interest.window() != window {
        return Err(Error::GridMismatch("covariate and pattern windows differ".into()));
    }
    for c in nuisance {
        if !c.geom().same_as(&geom) || c.window() != window {
            return Err(Error::GridMismatch("nuisance covariates must share the grid of the covariate of interest".into()));
        }
    }
    let mode = match config.correction {
        Correction::Torus => {
            let r = window.as_rect().expect("validated");
            if !geom.tiles(r) {
                return Err(Error::GridMismatch("torus correction needs a grid that tiles the window".into()));
            }
            ShiftMode::Torus
        }
        Correction::Variance => ShiftMode::Euclid,
    };
    let streams = SeedStream::new(config.seed);
    let nuis = informative(nuisance);
    let cell_area = geom.cell_area();

    let mut mass_flag = false;
    let mut bandwidth = None;
    let phi = match config.statistic {
        TestStatistic::Cwr => {
            let est = IntensityEstimate::fit(pattern, &nuis, config.residuals, interest)?;
            mass_flag = residual_measure(pattern, &est).mass_flag();
            let weights = est.field.map(|l| l * cell_area);
            Phi::Cwr { integral: ShiftCorrelation::new(&weights, interest, mode)? }
        }
        TestStatistic::MeanCovariate => {
            if pattern.is_empty() {
                return Err(Error::UndefinedStatistic("mean covariate of an empty pattern".into()));
            }
            Phi::Mean
        }
        TestStatistic::TauPartial => {
            let sampling = SamplingPoints::uniform(window, config.sampling_points, &mut streams.rng("sampling", 0));
            let (s, bw) =
                partial_residual_field(pattern, &nuis, config.residuals, &config.bandwidth, &sampling, cache)?;
            bandwidth = Some(bw);
            let residual = sampling.values(&s)?;
            Phi::Tau { sampling: sampling.points().to_vec(), residual }
        }
    };

    let ones = ScalarField::constant(geom, window.clone(), F::one())?;
    let overlap = match mode {
        ShiftMode::Euclid => Some(ShiftCorrelation::new(&ones, &ones, ShiftMode::Euclid)?),
        ShiftMode::Torus => None,
    };
    let shifter = Shifter { window, torus: window.as_rect().copied().filter(|_| mode == ShiftMode::Torus) };
    let cell_count = |v: ShiftVector<F>| -> f64 {
        let (kx, ky, _) = geom.snap(v);
        match &overlap {
            Some(o) => o.get(kx, ky).as_f64().round(),
            None => ones.masked_values().iter().filter(|v| **v > F::zero()).count() as f64,
        }
    };
    let retained = |v: ShiftVector<F>| -> usize {
        let pts = match &phi {
            Phi::Tau { sampling, .. } => sampling.as_slice(),
            _ => pattern.points(),
        };
        pts.iter().filter(|p| shifter.back(**p, v).is_some()).count()
    };
    let needed = match config.statistic {
        TestStatistic::TauPartial => 2,
        TestStatistic::MeanCovariate => 1,
        TestStatistic::Cwr => 0,
    };

    // shifts, the zero vector first
    let radius = match config.shift_distribution {
        ShiftDistribution::Disc => Some(F::lit(config.resolved_radius(window)?)),
        ShiftDistribution::Window => None,
    };
    let mut rng = streams.rng("shifts", 0);
    let mut shifts = vec![ShiftVector::zero()];
    let mut counts = vec![retained(ShiftVector::zero())];
    let mut redraws = 0;
    if counts[0] < needed {
        return Err(Error::UndefinedStatistic(format!("{} points in the window, {needed} needed", counts[0])));
    }
    while shifts.len() <= config.n_shifts {
        let raw = match radius {
            Some(r) => draw_disc(r, &mut rng),
            None => {
                let b = window.bbox();
                ShiftVector { dx: F::lit(rng.random::<f64>()) * b.width(), dy: F::lit(rng.random::<f64>()) * b.height() }
            }
        };
        let v = geom.snap(raw).2;
        let n = retained(v);
        if cell_count(v) > 0.0 && n >= needed {
            shifts.push(v);
            counts.push(n);
        } else {
            redraws += 1;
            if redraws > MAX_REDRAWS_PER_SHIFT * config.n_shifts {
                return Err(Error::UndefinedStatistic("too many shifts leave no data in the overlap".into()));
            }
        }
    }

    let lookup = |q: Point<F>| -> Result<f64> {
        interest.cell_value(q).map(|v| v.as_f64()).ok_or(Error::OutOfDomain { x: q.x.as_f64(), y: q.y.as_f64() })
    };
    let statistics: Vec<f64> = shifts
        .par_iter()
        .zip(counts.par_iter())
        .map(|(&v, &n)| -> Result<f64> {
            match &phi {
                Phi::Cwr { integral } => {
                    let (kx, ky, _) = geom.snap(v);
                    let mut sum = 0.0;
                    for p in pattern.points() {
                        if let Some(q) = shifter.back(*p, v) {
                            sum += lookup(q)?;
                        }
                    }
                    Ok(sum - integral.get(kx, ky).as_f64())
                }
                Phi::Mean => {
                    let mut sum = 0.0;
                    for p in pattern.points() {
                        if let Some(q) = shifter.back(*p, v) {
                            sum += lookup(q)?;
                        }
                    }
                    Ok(sum / n as f64)
                }
                Phi::Tau { sampling, residual } => {
                    let mut c = Vec::with_capacity(n);
                    let mut s = Vec::with_capacity(n);
                    for (p, r) in sampling.iter().zip(residual) {
                        if let Some(q) = shifter.back(*p, v) {
                            c.push(lookup(q)?);
                            s.push(*r);
                        }
                    }
                    kendall_tau(&c, &s)
                }
            }
        })
        .collect::<Result<_>>()?;

    let standardized = match (config.correction, config.statistic) {
        (Correction::Variance, TestStatistic::Cwr) => {
            let f: Vec<f64> = counts.iter().map(|&n| (n as f64).max(1.0)).collect();
            standardize(&statistics, &f)?
        }
        (Correction::Variance, _) => {
            let f: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
            standardize(&statistics, &f)?
        }
        // the mean covariate is not centred at zero under the null
        (Correction::Torus, TestStatistic::MeanCovariate) => standardize(&statistics, &vec![1.0; statistics.len()])?,
        (Correction::Torus, _) => statistics.clone(),
    };
    let p_value = monte_carlo_p_value(&standardized)?;
    let areas = shifts.iter().map(|v| cell_count(*v) * cell_area.as_f64()).collect();
    Ok(ShiftTestResult {
        observed: statistics[0],
        statistics,
        standardized,
        shifts: shifts.iter().map(|v| [v.dx.as_f64(), v.dy.as_f64()]).collect(),
        areas,
        retained: counts,
        redraws,
        p_value,
        radius: radius.map(|r| r.as_f64()),
        bandwidth,
        mass_flag,
        config: config.clone(),
    })
}
