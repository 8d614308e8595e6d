//! Dependence statistics between a point pattern and a covariate: Kendall's
//! τ̂ against the smoothed residual field, its partial version τ̂ₚ, the
//! covariate-weighted residual and the mean covariate at the points.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, Window};
use crate::raster::ScalarField;
use crate::residual::{smoothed_residual_field, IntensityEstimate, ResidualKind};
use crate::scalar::Scalar;
use crate::smooth::{default_bandwidth, Smoother, SmootherCache};

pub const DEFAULT_SAMPLING_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    Tau,
    TauPartial,
    Cwr,
    MeanCovariate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceResult {
    pub kind: StatisticKind,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling_points: Option<usize>,
}

/// Locations where the residual field and the covariate are compared,
/// drawn independently of the pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPoints<F> {
    points: Vec<Point<F>>,
}

impl<F: Scalar> SamplingPoints<F> {
    pub fn uniform<R: Rng + ?Sized>(window: &Window<F>, n: usize, rng: &mut R) -> Self {
        Self { points: (0..n).map(|_| window.sample_uniform(rng)).collect() }
    }

    /// Poisson number of uniform points with the given mean.
    pub fn poisson<R: Rng + ?Sized>(window: &Window<F>, mean: f64, rng: &mut R) -> Result<Self> {
        let d = Poisson::new(mean).map_err(|e| Error::InvalidParameter(format!("sampling mean: {e}")))?;
        let n = d.sample(rng) as usize;
        Ok(Self::uniform(window, n, rng))
    }

    pub fn from_points(points: Vec<Point<F>>, window: &Window<F>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !window.contains(**p)) {
            return Err(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() });
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point<F>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Field values at the sampling points.
    pub fn values(&self, field: &ScalarField<F>) -> Result<Vec<f64>> {
        self.points.iter().map(|p| field.lookup(*p).map(|v| v.as_f64())).collect()
    }
}

/// `(1/(n(n−1))) Σ_{i≠j} sgn(a_i − a_j) sgn(b_i − b_j)` with `sgn(0) = 0`,
/// computed in `O(n log n)` from exact integer pair counts.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewObservations(n));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter("Kendall's tau of NaN values".into()));
    }
    // NaN excluded, so partial_cmp is total and treats -0 and 0 as tied
    let cmp = |x: &f64, y: &f64| x.partial_cmp(y).unwrap();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&i, &j| cmp(&a[i], &a[j]).then_with(|| cmp(&b[i], &b[j])));

    let pairs = |t: u64| t * (t - 1) / 2;
    let (mut tied_a, mut tied_ab) = (0u64, 0u64);
    let (mut run_a, mut run_ab) = (1u64, 1u64);
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if a[i] == a[j] {
            run_a += 1;
            if b[i] == b[j] {
                run_ab += 1;
            } else {
                tied_ab += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            tied_a += pairs(run_a);
            tied_ab += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    tied_a += pairs(run_a);
    tied_ab += pairs(run_ab);

    let mut seq: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let mut buf = seq.clone();
    let discordant = merge_count(&mut seq, &mut buf);

    let mut tied_b = 0u64;
    let mut run = 1u64;
    for w in seq.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            tied_b += pairs(run);
            run = 1;
        }
    }
    tied_b += pairs(run);

    let total = pairs(n as u64);
    let untied = (total + tied_ab - tied_a - tied_b) as i128;
    let s = untied - 2 * discordant as i128;
    Ok(2.0 * s as f64 / (n as f64 * (n as f64 - 1.0)))
}

/// Sorts `v` and returns the number of pairs `i < j` with `v_i > v_j`.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (l, r) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..n].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// How the smoothing bandwidth of τ̂ₚ is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthChoice {
    /// `0.15 ×` the shorter side of the window's bounding box.
    Default,
    Fixed(f64),
    /// Minimize `Σ τ̂(s̃, C_i)²` over the listed candidates; empty means the
    /// default candidate grid.
    Adaptive(Vec<f64>),
}

/// Eight log-spaced bandwidths from 0.05 to 0.8 of the shorter side.
pub fn default_bandwidth_candidates<F: Scalar>(window: &Window<F>) -> Vec<f64> {
    let b = window.bbox();
    let side = b.width().min(b.height()).as_f64();
    let (lo, hi) = (0.05 * side, 0.8 * side);
    (0..8).map(|i| lo * (hi / lo).powf(i as f64 / 7.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    /// `Σ τ̂(s̃, C_i)²` at the chosen bandwidth.
    pub objective: f64,
    pub objectives: Vec<f64>,
}

/// Candidate minimizing `Σ_i τ̂(s̃, C_i)²`; ties go to the smaller
/// bandwidth.
pub fn adaptive_bandwidth<F: Scalar>(
    pattern: &PointPattern<F>,
    nuisance: &[&ScalarField<F>],
    estimate: &IntensityEstimate<F>,
    sampling: &SamplingPoints<F>,
    candidates: &[f64],
    cache: &SmootherCache<F>,
) -> Result<BandwidthSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate bandwidths".into()));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| candidates[i].total_cmp(&candidates[j]));
    let covs = nuisance.iter().map(|c| sampling.values(c)).collect::<Result<Vec<_>>>()?;
    let mut objectives = vec![0.0; candidates.len()];
    for &i in &order {
        if candidates.len() == 1 {
            break;
        }
        let s = residual_at(pattern, estimate, &*cache.get(candidates[i])?, sampling)?;
        let mut obj = 0.0;
        for c in &covs {
            let t = kendall_tau(c, &s)?;
            obj += t * t;
        }
        objectives[i] = obj;
    }
    let best = order.iter().copied().fold(order[0], |best, i| if objectives[i] < objectives[best] { i } else { best });
    Ok(BandwidthSelection { bandwidth: candidates[best], objective: objectives[best], objectives })
}

fn residual_at<F: Scalar>(
    pattern: &PointPattern<F>,
    estimate: &IntensityEstimate<F>,
    smoother: &Smoother<F>,
    sampling: &SamplingPoints<F>,
) -> Result<Vec<f64>> {
    let s = smoothed_residual_field(pattern, estimate, smoother)?;
    sampling.values(&s.field)
}

/// τ̂ between the covariate and the smoothed residual field of the
/// constant-intensity model.
pub fn tau_hat<F: Scalar>(
    pattern: &PointPattern<F>,
    covariate: &ScalarField<F>,
    smoother: &Smoother<F>,
    sampling: &SamplingPoints<F>,
) -> Result<DependenceResult> {
    let est = IntensityEstimate::constant(pattern, covariate)?;
    let s = residual_at(pattern, &est, smoother, sampling)?;
    let c = sampling.values(covariate)?;
    Ok(DependenceResult {
        kind: StatisticKind::Tau,
        value: kendall_tau(&c, &s)?,
        bandwidth: Some(smoother.kernel().bandwidth),
        sampling_points: Some(sampling.len()),
    })
}

/// Nuisance covariates with some variation over the window.
pub(crate) fn informative<'a, F: Scalar>(nuisance: &[&'a ScalarField<F>]) -> Vec<&'a ScalarField<F>> {
    nuisance
        .iter()
        .copied()
        .filter(|c| {
            let (lo, hi) = c.min_max();
            lo < hi
        })
        .collect()
}

/// Resolves a bandwidth choice against the nuisance model; without
/// informative nuisance covariates the adaptive rule has nothing to minimize
/// and the default bandwidth is used.
pub fn resolve_bandwidth<F: Scalar>(
    choice: &BandwidthChoice,
    pattern: &PointPattern<F>,
    nuisance: &[&ScalarField<F>],
    estimate: &IntensityEstimate<F>,
    sampling: &SamplingPoints<F>,
    cache: &SmootherCache<F>,
) -> Result<f64> {
    let nuisance = informative(nuisance);
    match choice {
        BandwidthChoice::Fixed(b) => Ok(*b),
        BandwidthChoice::Adaptive(_) if nuisance.is_empty() => Ok(default_bandwidth(pattern.window())),
        BandwidthChoice::Default => Ok(default_bandwidth(pattern.window())),
        BandwidthChoice::Adaptive(c) => {
            let c = if c.is_empty() { default_bandwidth_candidates(pattern.window()) } else { c.clone() };
            Ok(adaptive_bandwidth(pattern, &nuisance, estimate, sampling, &c, cache)?.bandwidth)
        }
    }
}

/// Smoothed residual field of the nuisance model evaluated for τ̂ₚ, with the
/// bandwidth it was built with.
pub fn partial_residual_field<F: Scalar>(
    pattern: &PointPattern<F>,
    nuisance: &[&ScalarField<F>],
    kind: ResidualKind,
    bandwidth: &BandwidthChoice,
    sampling: &SamplingPoints<F>,
    cache: &SmootherCache<F>,
) -> Result<(ScalarField<F>, f64)> {
    let like = nuisance.first().copied();
    let nuisance = informative(nuisance);
    let est = match like {
        Some(l) => IntensityEstimate::fit(pattern, &nuisance, kind, l)?,
        None => {
            let like = ScalarField::constant(*cache.geom(), cache.window().clone(), F::zero())?;
            IntensityEstimate::constant(pattern, &like)?
        }
    };
    let bw = resolve_bandwidth(bandwidth, pattern, &nuisance, &est, sampling, cache)?;
    let s = smoothed_residual_field(pattern, &est, &*cache.get(bw)?)?;
    Ok((s.field, bw))
}

/// τ̂ₚ: τ̂ between the covariate of interest and the smoothed residual field
/// of the nuisance model. Constant nuisance covariates are dropped.
pub fn tau_partial<F: Scalar>(
    pattern: &PointPattern<F>,
    nuisance: &[&ScalarField<F>],
    interest: &ScalarField<F>,
    kind: ResidualKind,
    bandwidth: &BandwidthChoice,
    sampling: &SamplingPoints<F>,
    cache: &SmootherCache<F>,
) -> Result<DependenceResult> {
    let (s, bw) = partial_residual_field(pattern, nuisance, kind, bandwidth, sampling, cache)?;
    let value = kendall_tau(&sampling.values(interest)?, &sampling.values(&s)?)?;
    Ok(DependenceResult {
        kind: StatisticKind::TauPartial,
        value,
        bandwidth: Some(bw),
        sampling_points: Some(sampling.len()),
    })
}

/// `Σ_{x ∈ X} C(x) − ∫_W C(u) λ̂(u) du`.
pub fn cwr<F: Scalar>(
    pattern: &PointPattern<F>,
    interest: &ScalarField<F>,
    estimate: &IntensityEstimate<F>,
) -> Result<DependenceResult> {
    let mut sum = 0.0;
    for p in pattern.points() {
        sum += interest.lookup(*p)?.as_f64();
    }
    let integral = interest.zip_map(&estimate.field, |c, l| c * l)?.integral().as_f64();
    Ok(DependenceResult { kind: StatisticKind::Cwr, value: sum - integral, bandwidth: None, sampling_points: None })
}

/// Mean covariate value at the points.
pub fn mean_covariate<F: Scalar>(pattern: &PointPattern<F>, covariate: &ScalarField<F>) -> Result<DependenceResult> {
    if pattern.is_empty() {
        return Err(Error::UndefinedStatistic("mean covariate of an empty pattern".into()));
    }
    let mut sum = 0.0;
    for p in pattern.points() {
        sum += covariate.lookup(*p)?.as_f64();
    }
    Ok(DependenceResult {
        kind: StatisticKind::MeanCovariate,
        value: sum / pattern.len() as f64,
        bandwidth: None,
        sampling_points: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::pointsim::simulate_poisson;
    use crate::raster::GridGeometry;
    use crate::smooth::KernelSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let sgn = |x: f64| (x > 0.0) as i64 - (x < 0.0) as i64;
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

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau(&[1., 2., 3.], &[1., 2., 3.]).unwrap(), 1.0);
        assert_eq!(kendall_tau(&[1., 2., 3.], &[3., 2., 1.]).unwrap(), -1.0);
        assert_abs_diff_eq!(kendall_tau(&[1., 2., 3., 4.], &[2., 1., 4., 3.]).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(kendall_tau(&[1., 1., 1.], &[3., 2., 1.]).unwrap(), 0.0);
        assert!(kendall_tau(&[1.], &[1.]).is_err());
        assert!(kendall_tau(&[1., 2.], &[1.]).is_err());
    }

    #[test]
    fn kendall_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rep in 0..1000 {
            let n = rng.random_range(2..60);
            let levels = if rep % 2 == 0 { 4 } else { 1_000_000 };
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64).collect();
            assert_eq!(kendall_tau(&a, &b).unwrap(), brute(&a, &b), "rep {rep}");
        }
    }

    proptest! {
        #[test]
        fn kendall_symmetric_and_monotone(v in prop::collection::vec((-5i32..5, -1e3f64..1e3), 2..40)) {
            let a: Vec<f64> = v.iter().map(|x| x.0 as f64).collect();
            let b: Vec<f64> = v.iter().map(|x| x.1).collect();
            let t = kendall_tau(&a, &b).unwrap();
            prop_assert_eq!(t, kendall_tau(&b, &a).unwrap());
            let a2: Vec<f64> = a.iter().map(|x| x.powi(3) + 7.0).collect();
            prop_assert_eq!(t, kendall_tau(&a2, &b).unwrap());
            prop_assert!((-1.0..=1.0).contains(&t));
        }
    }

    fn setup() -> (GridGeometry<f64>, Window<f64>) {
        (GridGeometry::tiling(&Rect::unit(), 64).unwrap(), Window::unit_square())
    }

    #[test]
    fn cwr_empty_pattern() {
        let (g, w) = setup();
        let one = ScalarField::constant(g, w.clone(), 1.0).unwrap();
        let est = IntensityEstimate::supplied(ScalarField::constant(g, w.clone(), 7.0).unwrap());
        let r = cwr(&PointPattern::empty(w), &one, &est).unwrap();
        assert_abs_diff_eq!(r.value, -7.0, epsilon = 1e-12);
    }

    #[test]
    fn cwr_is_linear_in_covariate() {
        let (g, w) = setup();
        let c = ScalarField::from_fn(g, w.clone(), |p| (5.0 * p.x).sin() + p.y).unwrap();
        let lam = ScalarField::constant(g, w.clone(), 100.0).unwrap();
        let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let est = IntensityEstimate::supplied(lam);
        let a = cwr(&pat, &c, &est).unwrap().value;
        let b = cwr(&pat, &c.map(|v| -2.5 * v), &est).unwrap().value;
        assert!((b + 2.5 * a).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn mean_covariate_examples() {
        let (g, w) = setup();
        let c = ScalarField::from_fn(g, w.clone(), |p| if p.x < 0.5 { 1.0 } else { 3.0 }).unwrap();
        let pat = PointPattern::new(vec![Point::new(0.2, 0.2), Point::new(0.8, 0.2)], w.clone()).unwrap();
        assert_eq!(mean_covariate(&pat, &c).unwrap().value, 2.0);
        let k = ScalarField::constant(g, w.clone(), 0.3).unwrap();
        assert_eq!(mean_covariate(&pat, &k).unwrap().value, 0.3);
        assert!(matches!(mean_covariate(&PointPattern::empty(w), &c), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn tau_hat_constant_covariate_is_zero() {
        let (g, w) = setup();
        let c = ScalarField::constant(g, w.clone(), 2.0).unwrap();
        let pat = simulate_poisson(&c.map(|_| 100.0), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let sm = Smoother::new(g, w.clone(), KernelSpec::new(0.1).unwrap()).unwrap();
        let sp = SamplingPoints::uniform(&w, 100, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(tau_hat(&pat, &c, &sm, &sp).unwrap().value, 0.0);
    }

    #[test]
    fn constant_nuisance_reduces_to_tau_hat() {
        let (g, w) = setup();
        let x = ScalarField::from_fn(g, w.clone(), |p| p.x).unwrap();
        let k = ScalarField::constant(g, w.clone(), 1.0).unwrap();
        let pat = simulate_poisson(&x.map(|v| 200.0 * v.exp() / 1.718), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let sp = SamplingPoints::uniform(&w, 100, &mut ChaCha8Rng::seed_from_u64(8));
        let cache = SmootherCache::new(g, w.clone());
        for kind in [ResidualKind::Parametric, ResidualKind::Nonparametric] {
            let tp = tau_partial(&pat, &[&k], &x, kind, &BandwidthChoice::Fixed(0.2), &sp, &cache).unwrap();
            let t = tau_hat(&pat, &x, &*cache.get(0.2).unwrap(), &sp).unwrap();
            assert!((tp.value - t.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn adaptive_rule_picks_the_minimum() {
        let (g, w) = setup();
        let x = ScalarField::from_fn(g, w.clone(), |p| p.x).unwrap();
        let pat = simulate_poisson(&x.map(|v| 150.0 * (2.0 * v).exp() / 3.19), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let sp = SamplingPoints::uniform(&w, 100, &mut ChaCha8Rng::seed_from_u64(10));
        let cache = SmootherCache::new(g, w.clone());
        let est = IntensityEstimate::fit(&pat, &[&x], ResidualKind::Nonparametric, &x).unwrap();
        let cands = default_bandwidth_candidates(&w);
        let sel = adaptive_bandwidth(&pat, &[&x], &est, &sp, &cands, &cache).unwrap();
        for &b in &cands {
            let s = residual_at(&pat, &est, &*cache.get(b).unwrap(), &sp).unwrap();
            let t = kendall_tau(&sp.values(&x).unwrap(), &s).unwrap();
            assert!(sel.objective <= t * t);
        }
        let one = adaptive_bandwidth(&pat, &[&x], &est, &sp, &[0.3], &cache).unwrap();
        assert_eq!(one.bandwidth, 0.3);
    }

    #[test]
    fn adaptive_ties_go_to_smaller_bandwidth() {
        let (g, w) = setup();
        // a constant nuisance gives a zero objective for every candidate
        let k = ScalarField::constant(g, w.clone(), 1.0).unwrap();
        let pat = simulate_poisson(&k.map(|_| 100.0), &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let sp = SamplingPoints::uniform(&w, 50, &mut ChaCha8Rng::seed_from_u64(12));
        let cache = SmootherCache::new(g, w.clone());
        let est = IntensityEstimate::constant(&pat, &k).unwrap();
        let sel = adaptive_bandwidth(&pat, &[&k], &est, &sp, &[0.3, 0.1, 0.2], &cache).unwrap();
        assert_eq!(sel.bandwidth, 0.1);
    }

    #[test]
    fn default_candidates_span_the_grid() {
        let c = default_bandwidth_candidates(&Window::<f64>::rect(0.0, 0.0, 2.0, 1.0).unwrap());
        assert_eq!(c.len(), 8);
        assert_abs_diff_eq!(c[0], 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(c[7], 0.8, epsilon = 1e-12);
    }
}
