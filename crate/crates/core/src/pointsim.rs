//! Point-process simulators: inhomogeneous Poisson, log-Gaussian Cox,
//! Strauss and hardcore Strauss, plus the declarative model description that
//! drives the experiment harness.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point, PointPattern, Window};
use crate::randfield::{GaussFieldSpec, GrfSampler};
use crate::raster::{GridGeometry, ScalarField};
use crate::rng::SeedStream;
use crate::scalar::Scalar;

/// Intensity or trend expression over the simulated fields `Z1, Z2, …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Const(f64),
    /// `Z_k`, 1-based.
    Field(usize),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Exp(Box<Expr>),
    Square(Box<Expr>),
    /// `max(·, 0)`.
    PosPart(Box<Expr>),
    /// Rescales so the maximum over the window is 1.
    NormalizeMax(Box<Expr>),
}

impl Expr {
    pub fn c(v: f64) -> Self {
        Expr::Const(v)
    }

    pub fn z(k: usize) -> Self {
        Expr::Field(k)
    }

    pub fn add(parts: Vec<Expr>) -> Self {
        Expr::Add(parts)
    }

    pub fn mul(parts: Vec<Expr>) -> Self {
        Expr::Mul(parts)
    }

    pub fn exp(e: Expr) -> Self {
        Expr::Exp(Box::new(e))
    }

    pub fn square(e: Expr) -> Self {
        Expr::Square(Box::new(e))
    }

    pub fn pos_part(e: Expr) -> Self {
        Expr::PosPart(Box::new(e))
    }

    pub fn normalize_max(e: Expr) -> Self {
        Expr::NormalizeMax(Box::new(e))
    }

    /// Largest field index referenced.
    pub fn max_field(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Field(k) => *k,
            Expr::Add(v) | Expr::Mul(v) => v.iter().map(Expr::max_field).max().unwrap_or(0),
            Expr::Exp(e) | Expr::Square(e) | Expr::PosPart(e) | Expr::NormalizeMax(e) => e.max_field(),
        }
    }

    /// Evaluates cell by cell; every field must share one grid.
    pub fn eval<F: Scalar>(&self, fields: &[ScalarField<F>]) -> Result<ScalarField<F>> {
        let base = fields.first().ok_or_else(|| Error::InvalidParameter("no fields to evaluate on".into()))?;
        if let Some(f) = fields.iter().find(|f| !f.geom().same_as(base.geom())) {
            return Err(Error::GridMismatch(format!("field grid {:?} differs from {:?}", f.geom(), base.geom())));
        }
        let values = self.eval_values(fields, base.mask())?;
        Ok(base.with_values(values))
    }

    fn eval_values<F: Scalar>(&self, fields: &[ScalarField<F>], mask: &[bool]) -> Result<Vec<F>> {
        let n = mask.len();
        Ok(match self {
            Expr::Const(v) => vec![F::lit(*v); n],
            Expr::Field(k) => {
                if *k == 0 || *k > fields.len() {
                    return Err(Error::InvalidParameter(format!("field Z{k} is not available")));
                }
                fields[k - 1].values().to_vec()
            }
            Expr::Add(parts) | Expr::Mul(parts) => {
                let is_add = matches!(self, Expr::Add(_));
                let mut acc = vec![if is_add { F::zero() } else { F::one() }; n];
                for p in parts {
                    let v = p.eval_values(fields, mask)?;
                    for (a, b) in acc.iter_mut().zip(v) {
                        *a = if is_add { *a + b } else { *a * b };
                    }
                }
                acc
            }
            Expr::Exp(e) => e.eval_values(fields, mask)?.into_iter().map(F::exp).collect(),
            Expr::Square(e) => e.eval_values(fields, mask)?.into_iter().map(|v| v * v).collect(),
            Expr::PosPart(e) => e.eval_values(fields, mask)?.into_iter().map(|v| v.max(F::zero())).collect(),
            Expr::NormalizeMax(e) => {
                let v = e.eval_values(fields, mask)?;
                let max = v.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| x).fold(F::neg_infinity(), F::max);
                if !(max > F::zero()) || !max.is_finite() {
                    return Err(Error::InvalidParameter("cannot normalize a field whose maximum is not positive".into()));
                }
                v.into_iter().map(|x| x / max).collect()
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Interaction {
    Poisson,
    /// Poisson given the random driving intensity built by the trend.
    Lgcp,
    Strauss { gamma: f64, r: f64 },
    HardcoreStrauss { hc: f64, gamma: f64, r: f64 },
}

impl Interaction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Interaction::Poisson | Interaction::Lgcp => Ok(()),
            Interaction::Strauss { gamma, r } => {
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Strauss interaction needs 0 < gamma <= 1 without a hard core, got {gamma}"
                    )));
                }
                if !(r > 0.0) || !r.is_finite() {
                    return Err(Error::InvalidParameter("interaction range must be positive".into()));
                }
                Ok(())
            }
            Interaction::HardcoreStrauss { hc, gamma, r } => {
                if !(hc > 0.0) || !(gamma > 0.0) || !gamma.is_finite() || !(r > hc) || !r.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "hardcore Strauss needs hc > 0, gamma > 0 and r > hc (got hc={hc}, gamma={gamma}, r={r})"
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub name: String,
    pub expr: Expr,
}

/// Metropolis–Hastings settings for Gibbs models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsConfig {
    pub steps: usize,
    pub p_birth: f64,
    pub p_death: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self { steps: 100_000, p_birth: 0.35, p_death: 0.35 }
    }
}

impl GibbsConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.p_birth > 0.0 && self.p_death > 0.0 && self.p_birth + self.p_death <= 1.0;
        if !ok {
            return Err(Error::InvalidParameter("birth/death proposal probabilities must be positive and sum to at most 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    pub interaction: Interaction,
    /// Intensity (Poisson, LGCP) or trend `β(u)` (Gibbs models).
    pub trend: Expr,
    /// Observed covariates, in order `C1, C2, …`.
    pub covariates: Vec<CovariateSpec>,
    /// Number of simulated fields `Z1…Zk`.
    pub n_fields: usize,
    pub field: GaussFieldSpec,
    #[serde(default)]
    pub gibbs: GibbsConfig,
    /// Nominal expected count, informational.
    #[serde(default)]
    pub target_mean: Option<f64>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.interaction.validate()?;
        self.field.validate()?;
        self.gibbs.validate()?;
        let used = self.covariates.iter().map(|c| c.expr.max_field()).chain([self.trend.max_field()]).max().unwrap_or(0);
        if used > self.n_fields {
            return Err(Error::InvalidParameter(format!(
                "model {} references Z{used} but only simulates {} fields",
                self.name, self.n_fields
            )));
        }
        Ok(())
    }
}

/// One simulated data set: fields, observed covariates and the pattern.
#[derive(Debug, Clone)]
pub struct Realization<F: Scalar> {
    pub fields: Vec<ScalarField<F>>,
    pub covariates: Vec<(String, ScalarField<F>)>,
    pub intensity: ScalarField<F>,
    pub pattern: PointPattern<F>,
}

impl<F: Scalar> Realization<F> {
    pub fn covariate(&self, name: &str) -> Option<&ScalarField<F>> {
        self.covariates.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }
}

/// Model simulator with the field sampler cached across replicates.
#[derive(Debug)]
pub struct Simulator<F: Scalar> {
    spec: ModelSpec,
    sampler: GrfSampler<F>,
}

impl<F: Scalar> Simulator<F> {
    pub fn new(spec: ModelSpec, geom: GridGeometry<F>, window: Window<F>) -> Result<Self> {
        spec.validate()?;
        let sampler = GrfSampler::new(spec.field, geom, window)?;
        Ok(Self { spec, sampler })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Fields come from stream `fields`, the pattern from stream `pattern`.
    pub fn simulate(&self, seeds: &SeedStream) -> Result<Realization<F>> {
        let fields = self.sampler.sample_many(self.spec.n_fields, &mut seeds.rng("fields", 0));
        let covariates = self
            .spec
            .covariates
            .iter()
            .map(|c| Ok((c.name.clone(), c.expr.eval(&fields)?)))
            .collect::<Result<Vec<_>>>()?;
        let intensity = self.spec.trend.eval(&fields)?;
        let mut rng = seeds.rng("pattern", 0);
        let pattern = match self.spec.interaction {
            Interaction::Poisson | Interaction::Lgcp => simulate_poisson(&intensity, &mut rng)?,
            inter => simulate_gibbs(inter, &intensity, &self.spec.gibbs, &mut rng)?,
        };
        Ok(Realization { fields, covariates, intensity, pattern })
    }
}

/// Inhomogeneous Poisson pattern by thinning a dominating homogeneous one;
/// the intensity is piecewise constant on cells.
pub fn simulate_poisson<F: Scalar, R: Rng + ?Sized>(intensity: &ScalarField<F>, rng: &mut R) -> Result<PointPattern<F>> {
    let window = intensity.window().clone();
    let (lo, hi) = intensity.min_max();
    if lo < F::zero() {
        return Err(Error::InvalidParameter("intensity must be nonnegative".into()));
    }
    let lmax = hi.as_f64();
    if !(lmax > 0.0) {
        return Ok(PointPattern::empty(window));
    }
    let bbox = window.bbox();
    let mean = lmax * bbox.area().as_f64();
    let n = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng) as usize;
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        let p = Point::new(
            bbox.x0 + bbox.width() * F::lit(rng.random::<f64>()),
            bbox.y0 + bbox.height() * F::lit(rng.random::<f64>()),
        );
        let u: f64 = rng.random();
        if !window.contains(p) {
            continue;
        }
        let l = intensity.cell_value(p).map(Scalar::as_f64).unwrap_or(0.0);
        if u * lmax < l {
            pts.push(p);
        }
    }
    Ok(PointPattern::from_trusted(pts, window))
}

/// Draws the driving fields and simulates the Poisson pattern given `Λ`.
pub fn simulate_lgcp<F: Scalar>(sim: &Simulator<F>, seeds: &SeedStream) -> Result<Realization<F>> {
    if !matches!(sim.spec.interaction, Interaction::Lgcp | Interaction::Poisson) {
        return Err(Error::InvalidParameter(format!("model {} is not a Cox process", sim.spec.name)));
    }
    sim.simulate(seeds)
}

/// Points indexed by square buckets of side `reach`.
struct BucketGrid {
    x0: f64,
    y0: f64,
    size: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
    pts: Vec<[f64; 2]>,
    home: Vec<usize>,
}

impl BucketGrid {
    fn new(x0: f64, y0: f64, x1: f64, y1: f64, reach: f64) -> Self {
        let nx = (((x1 - x0) / reach).floor() as usize).clamp(1, 4096);
        let ny = (((y1 - y0) / reach).floor() as usize).clamp(1, 4096);
        let size = ((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64);
        Self { x0, y0, size, nx, ny, buckets: vec![Vec::new(); nx * ny], pts: Vec::new(), home: Vec::new() }
    }

    fn bucket(&self, p: [f64; 2]) -> (usize, usize) {
        let bx = (((p[0] - self.x0) / self.size).floor().max(0.0) as usize).min(self.nx - 1);
        let by = (((p[1] - self.y0) / self.size).floor().max(0.0) as usize).min(self.ny - 1);
        (bx, by)
    }

    fn len(&self) -> usize {
        self.pts.len()
    }

    fn insert(&mut self, p: [f64; 2]) {
        let (bx, by) = self.bucket(p);
        let b = by * self.nx + bx;
        self.buckets[b].push(self.pts.len() as u32);
        self.pts.push(p);
        self.home.push(b);
    }

    fn remove(&mut self, i: usize) {
        let b = self.home[i];
        let pos = self.buckets[b].iter().position(|&j| j as usize == i).expect("indexed point");
        self.buckets[b].swap_remove(pos);
        let last = self.pts.len() - 1;
        if i != last {
            let lb = self.home[last];
            let lpos = self.buckets[lb].iter().position(|&j| j as usize == last).expect("indexed point");
            self.buckets[lb][lpos] = i as u32;
        }
        self.pts.swap_remove(i);
        self.home.swap_remove(i);
    }

    /// `(close, near)`: points within `hc` and within `r` of `p`, skipping
    /// index `skip`. Stops early once a point within `hc` is found.
    fn neighbours(&self, p: [f64; 2], hc: f64, r: f64, skip: Option<usize>) -> (bool, u32) {
        let (bx, by) = self.bucket(p);
        let (hc2, r2) = (hc * hc, r * r);
        let mut near = 0;
        for yy in by.saturating_sub(1)..=(by + 1).min(self.ny - 1) {
            for xx in bx.saturating_sub(1)..=(bx + 1).min(self.nx - 1) {
                for &j in &self.buckets[yy * self.nx + xx] {
                    if Some(j as usize) == skip {
                        continue;
                    }
                    let q = self.pts[j as usize];
                    let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                    if d2 < hc2 {
                        return (true, near);
                    }
                    if d2 < r2 {
                        near += 1;
                    }
                }
            }
        }
        (false, near)
    }
}

/// Birth–death–move Metropolis–Hastings for (hardcore) Strauss processes
/// with trend `β`; starts from a Poisson(β) pattern with hard-core
/// violations removed.
pub fn simulate_gibbs<F: Scalar, R: Rng + ?Sized>(
    interaction: Interaction,
    trend: &ScalarField<F>,
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<PointPattern<F>> {
    interaction.validate()?;
    config.validate()?;
    let (hc, gamma, r) = match interaction {
        Interaction::Poisson | Interaction::Lgcp => (0.0, 1.0, 0.0),
        Interaction::Strauss { gamma, r } => (0.0, gamma, r),
        Interaction::HardcoreStrauss { hc, gamma, r } => (hc, gamma, r),
    };
    let window = trend.window().clone();
    let b = window.bbox();
    let (bx0, by0, bw, bh) = (b.x0.as_f64(), b.y0.as_f64(), b.width().as_f64(), b.height().as_f64());
    let area = window.area().as_f64();
    let beta = |p: [f64; 2]| -> f64 {
        trend.cell_value(Point::new(F::lit(p[0]), F::lit(p[1]))).map(Scalar::as_f64).unwrap_or(0.0)
    };
    let inside = |p: [f64; 2]| window.contains(Point::new(F::lit(p[0]), F::lit(p[1])));
    let uniform = |rng: &mut R| -> [f64; 2] {
        loop {
            let p = [bx0 + bw * rng.random::<f64>(), by0 + bh * rng.random::<f64>()];
            if inside(p) {
                return p;
            }
        }
    };
    let reach = r.max(hc).max(1e-3 * bw.min(bh));
    let mut grid = BucketGrid::new(bx0, by0, bx0 + bw, by0 + bh, reach);
    for p in simulate_poisson(trend, rng)?.points() {
        let q = [p.x.as_f64(), p.y.as_f64()];
        if hc == 0.0 || !grid.neighbours(q, hc, r, None).0 {
            grid.insert(q);
        }
    }
    let ln_gamma = gamma.ln();
    let papangelou = |grid: &BucketGrid, p: [f64; 2], skip: Option<usize>| -> f64 {
        let (close, near) = grid.neighbours(p, hc, r, skip);
        if close {
            return 0.0;
        }
        let b = beta(p);
        if near == 0 || gamma == 1.0 {
            b
        } else {
            b * (ln_gamma * near as f64).exp()
        }
    };
    let step = 0.05 * bw.min(bh);
    let p_birth = config.p_birth;
    let p_death = config.p_death;
    for _ in 0..config.steps {
        let u: f64 = rng.random();
        let n = grid.len();
        if u < p_birth {
            let p = uniform(rng);
            let ratio = papangelou(&grid, p, None) * area * p_death / ((n + 1) as f64 * p_birth);
            if rng.random::<f64>() < ratio {
                grid.insert(p);
            }
        } else if u < p_birth + p_death {
            if n == 0 {
                continue;
            }
            let i = rng.random_range(0..n);
            let l = papangelou(&grid, grid.pts[i], Some(i));
            let ratio = n as f64 * p_birth / (area * l * p_death);
            if l == 0.0 || rng.random::<f64>() < ratio {
                grid.remove(i);
            }
        } else {
            if n == 0 {
                continue;
            }
            let i = rng.random_range(0..n);
            let old = grid.pts[i];
            let new = [old[0] + step * (2.0 * rng.random::<f64>() - 1.0), old[1] + step * (2.0 * rng.random::<f64>() - 1.0)];
            if !inside(new) {
                continue;
            }
            let l_new = papangelou(&grid, new, Some(i));
            let l_old = papangelou(&grid, old, Some(i));
            if l_new > 0.0 && (l_old == 0.0 || rng.random::<f64>() * l_old < l_new) {
                grid.remove(i);
                grid.insert(new);
            }
        }
    }
    let pts = grid.pts.iter().map(|p| Point::new(F::lit(p[0]), F::lit(p[1]))).collect();
    Ok(PointPattern::from_trusted(pts, window))
}

/// Named models of the simulation study.
pub mod catalog {
    use super::*;

    /// Covariance scale of every simulated field.
    pub const FIELD_SCALE: f64 = 0.1;

    pub const NAMES: [&str; 17] = [
        "P1", "P2", "L1", "L2", "S1", "S2", "H1", "H2", "P1p", "P2p", "L1p", "L2p", "S1p", "S2p", "H1p", "H2p", "L1*",
    ];

    /// Optional overrides: `a` for the power models, `b` for `L1*`.
    #[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub struct ModelParams {
        pub a: Option<f64>,
        pub b: Option<f64>,
    }

    fn strauss() -> Interaction {
        Interaction::Strauss { gamma: 0.5, r: 0.05 }
    }

    fn hardcore() -> Interaction {
        Interaction::HardcoreStrauss { hc: 0.01, gamma: 4.0, r: 0.02 }
    }

    fn cov(name: &str, expr: Expr) -> CovariateSpec {
        CovariateSpec { name: name.into(), expr }
    }

    /// `a·Z3 − a²/2`.
    fn tilt(a: f64) -> Expr {
        Expr::add(vec![Expr::mul(vec![Expr::c(a), Expr::z(3)]), Expr::c(-a * a / 2.0)])
    }

    /// `max(1 − Z1²/5, 0)`.
    fn bump() -> Expr {
        Expr::pos_part(Expr::add(vec![Expr::c(1.0), Expr::mul(vec![Expr::c(-0.2), Expr::square(Expr::z(1))])]))
    }

    pub fn model(name: &str, params: ModelParams) -> Result<ModelSpec> {
        let key = name.trim();
        let canonical = NAMES
            .iter()
            .find(|n| n.eq_ignore_ascii_case(key))
            .ok_or_else(|| Error::Config(format!("unknown model '{name}'; expected one of {}", NAMES.join(", "))))?;
        let power = canonical.ends_with('p');
        let default_a = if canonical.starts_with('L') { 0.5 } else { 0.25 };
        let a = params.a.unwrap_or(default_a);
        if params.a.is_some() && !power {
            return Err(Error::Config(format!("parameter a applies only to the power models, not {canonical}")));
        }
        if params.b.is_some() && *canonical != "L1*" {
            return Err(Error::Config(format!("parameter b applies only to L1*, not {canonical}")));
        }
        let b = params.b.unwrap_or(1.0);
        if !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config("model parameters must be finite and b > 0".into()));
        }
        let z1 = || Expr::z(1);
        let sq1 = || Expr::square(Expr::z(1));
        let (interaction, trend, target) = match *canonical {
            "P1" => (Interaction::Poisson, Expr::exp(Expr::add(vec![Expr::c(4.5), z1()])), 5f64.exp()),
            "P2" => (Interaction::Poisson, Expr::mul(vec![Expr::c(5f64.exp()), sq1()]), 5f64.exp()),
            "L1" | "L1*" => (Interaction::Lgcp, Expr::exp(Expr::add(vec![Expr::c(4.0), z1(), Expr::z(2)])), 5f64.exp()),
            "L2" => (
                Interaction::Lgcp,
                Expr::mul(vec![Expr::exp(Expr::add(vec![Expr::c(4.5), Expr::z(2)])), sq1()]),
                5f64.exp(),
            ),
            "S1" => (strauss(), Expr::mul(vec![Expr::c(220.0), Expr::exp(z1())]), 5f64.exp()),
            "S2" => (strauss(), Expr::mul(vec![Expr::c(350.0), sq1()]), 5f64.exp()),
            "H1" => (
                hardcore(),
                Expr::mul(vec![Expr::c(180.0), Expr::normalize_max(Expr::exp(Expr::mul(vec![Expr::c(0.2), z1()])))]),
                5f64.exp(),
            ),
            "H2" => (hardcore(), Expr::mul(vec![Expr::c(120.0), Expr::normalize_max(bump())]), 5f64.exp()),
            "P1p" => (Interaction::Poisson, Expr::exp(Expr::add(vec![Expr::c(4.5), z1(), tilt(a)])), 5f64.exp()),
            "P2p" => (
                Interaction::Poisson,
                Expr::mul(vec![Expr::exp(Expr::add(vec![Expr::c(5.0), tilt(a)])), sq1()]),
                5f64.exp(),
            ),
            "L1p" => (
                Interaction::Lgcp,
                Expr::exp(Expr::add(vec![Expr::c(4.0), z1(), Expr::z(2), tilt(a)])),
                5f64.exp(),
            ),
            "L2p" => (
                Interaction::Lgcp,
                Expr::mul(vec![Expr::exp(Expr::add(vec![Expr::c(4.5), Expr::z(2), tilt(a)])), sq1()]),
                5f64.exp(),
            ),
            "S1p" => (
                strauss(),
                Expr::mul(vec![
                    Expr::c(210.0),
                    Expr::exp(Expr::add(vec![z1(), Expr::mul(vec![Expr::c(a), Expr::z(3)])])),
                ]),
                5f64.exp(),
            ),
            "S2p" => (
                strauss(),
                Expr::mul(vec![Expr::c(350.0), Expr::exp(Expr::mul(vec![Expr::c(a), Expr::z(3)])), sq1()]),
                5f64.exp(),
            ),
            "H1p" => (
                hardcore(),
                Expr::mul(vec![
                    Expr::c(190.0),
                    Expr::normalize_max(Expr::exp(Expr::add(vec![Expr::mul(vec![Expr::c(0.2), z1()]), tilt(a)]))),
                ]),
                5f64.exp(),
            ),
            "H2p" => (
                hardcore(),
                Expr::mul(vec![Expr::c(170.0), Expr::normalize_max(Expr::mul(vec![Expr::exp(tilt(a)), bump()]))]),
                5f64.exp(),
            ),
            _ => unreachable!("name validated against the catalog"),
        };
        let c2 = if power {
            Expr::add(vec![z1(), Expr::mul(vec![Expr::c(2.0), Expr::z(3)])])
        } else if *canonical == "L1*" {
            Expr::add(vec![z1(), Expr::mul(vec![Expr::c(b), Expr::z(3)])])
        } else {
            Expr::z(3)
        };
        let spec = ModelSpec {
            name: canonical.to_string(),
            interaction,
            trend,
            covariates: vec![cov("C1", z1()), cov("C2", c2)],
            n_fields: 3,
            field: GaussFieldSpec::standard(FIELD_SCALE),
            gibbs: GibbsConfig::default(),
            target_mean: Some(target),
        };
        spec.validate()?;
        Ok(spec)
    }
}
