//! Kernel ratio estimator of the intensity as a function of covariate
//! values, `λ̂(u) = ρ̂(C₁(u), …, C_m(u))`.
//!
//! Numerator and denominator are linearly binned on a regular grid in
//! covariate space, smoothed with a product Gaussian kernel, and read back
//! by multilinear interpolation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::PointPattern;
use crate::raster::ScalarField;
use crate::scalar::Scalar;

/// Largest number of covariates accepted by the estimator.
pub const MAX_COVARIATES: usize = 3;

/// Relative floor on the denominator, in units of the window area.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;

/// Kernel extent in bandwidths beyond the observed covariate range.
const REACH: f64 = 4.0;

fn bins_for(m: usize) -> usize {
    match m {
        1 => 512,
        2 => 128,
        _ => 40,
    }
}

/// Fitted `ρ̂` and the induced intensity field.
#[derive(Debug, Clone)]
pub struct RhoEstimate<F: Scalar> {
    intensity: ScalarField<F>,
    bandwidths: Vec<f64>,
    floor_active: bool,
    table: Option<BinnedRatio>,
}

#[derive(Debug, Clone, Serialize)]
struct BinnedRatio {
    lo: Vec<f64>,
    step: Vec<f64>,
    bins: usize,
    num: Vec<f64>,
    den: Vec<f64>,
    floor: f64,
}

impl BinnedRatio {
    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().rev().fold(0, |acc, &i| acc * self.bins + i)
    }

    /// Multilinear interpolation of numerator and denominator at `z`.
    fn interpolate(&self, z: &[f64]) -> (f64, f64) {
        let m = z.len();
        let mut base = vec![0usize; m];
        let mut frac = vec![0.0; m];
        for j in 0..m {
            let t = ((z[j] - self.lo[j]) / self.step[j]).clamp(0.0, (self.bins - 1) as f64);
            let i = (t.floor() as usize).min(self.bins - 2);
            base[j] = i;
            frac[j] = t - i as f64;
        }
        let (mut n, mut d) = (0.0, 0.0);
        let mut idx = vec![0usize; m];
        for corner in 0..(1usize << m) {
            let mut w = 1.0;
            for j in 0..m {
                let up = (corner >> j) & 1 == 1;
                idx[j] = base[j] + up as usize;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
            }
            if w == 0.0 {
                continue;
            }
            let k = self.flat(&idx);
            n += w * self.num[k];
            d += w * self.den[k];
        }
        (n, d)
    }

    fn ratio(&self, z: &[f64]) -> (f64, bool) {
        let (n, d) = self.interpolate(z);
        if d < self.floor {
            ((n / self.floor).max(0.0), true)
        } else {
            ((n / d).max(0.0), false)
        }
    }
}

impl<F: Scalar> RhoEstimate<F> {
    /// Fitted intensity on the covariate grid.
    pub fn intensity(&self) -> &ScalarField<F> {
        &self.intensity
    }

    pub fn into_intensity(self) -> ScalarField<F> {
        self.intensity
    }

    /// Covariate-space bandwidths, one per covariate.
    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// True when the denominator floor was hit somewhere on the grid.
    pub fn floor_active(&self) -> bool {
        self.floor_active
    }

    /// `ρ̂(z)`; for `m = 0` the argument is ignored.
    pub fn rho(&self, z: &[f64]) -> Result<f64> {
        match &self.table {
            None => Ok(self.intensity.window_values().next().map(Scalar::as_f64).unwrap_or(0.0)),
            Some(t) => {
                if z.len() != t.lo.len() {
                    return Err(Error::LengthMismatch(z.len(), t.lo.len()));
                }
                Ok(t.ratio(z).0)
            }
        }
    }
}

/// Normal-scale rule `σ̂_j · n^{−1/(4+m)}` where `σ̂_j` and `n` describe the
/// sample of covariate values at the window cells.
pub fn default_rho_bandwidths<F: Scalar>(covariates: &[&ScalarField<F>]) -> Result<Vec<f64>> {
    let m = covariates.len();
    let n = covariates.first().map_or(1, |c| c.mask().iter().filter(|&&b| b).count());
    let factor = (n.max(1) as f64).powf(-1.0 / (4.0 + m as f64));
    covariates
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let sd = c.variance().as_f64().sqrt();
            let scale = c.window_values().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
            if !(sd > 1e-12 * scale.max(1e-300)) {
                return Err(Error::DegenerateCovariate(j));
            }
            Ok(sd * factor)
        })
        .collect()
}

pub fn fit_rho<F: Scalar>(
    pattern: &PointPattern<F>,
    covariates: &[&ScalarField<F>],
    bandwidths: Option<&[f64]>,
) -> Result<RhoEstimate<F>> {
    let m = covariates.len();
    if m > MAX_COVARIATES {
        return Err(Error::TooManyCovariates { got: m, limit: MAX_COVARIATES });
    }
    let window = pattern.window();
    if m == 0 {
        return Err(Error::InvalidParameter("fit_rho needs a grid; use fit_rho_constant for m = 0".into()));
    }
    let base = covariates[0];
    for c in covariates {
        if !c.geom().same_as(base.geom()) {
            return Err(Error::GridMismatch("covariates live on different grids".into()));
        }
        if c.window() != window {
            return Err(Error::GridMismatch("covariate window differs from the pattern window".into()));
        }
    }
    let default = default_rho_bandwidths(covariates)?;
    let bw = match bandwidths {
        Some(b) => {
            if b.len() != m {
                return Err(Error::LengthMismatch(b.len(), m));
            }
            if let Some(x) = b.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("covariate bandwidth must be positive, got {x}")));
            }
            b.to_vec()
        }
        None => default,
    };
    let geom = base.geom();
    let mask = base.mask();
    let cells: Vec<usize> = (0..geom.len()).filter(|&i| mask[i]).collect();
    let value = |j: usize, i: usize| covariates[j].values()[i].as_f64();

    let bins = bins_for(m);
    let mut lo = vec![0.0; m];
    let mut step = vec![0.0; m];
    for j in 0..m {
        let (a, b) = cells.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| {
            let v = value(j, i);
            (a.min(v), b.max(v))
        });
        lo[j] = a - REACH * bw[j];
        step[j] = (b + REACH * bw[j] - lo[j]) / (bins - 1) as f64;
    }
    let total = bins.pow(m as u32);
    let mut num = vec![0.0; total];
    let mut den = vec![0.0; total];
    let cell_area = geom.cell_area().as_f64();
    let mut z = vec![0.0; m];
    let deposit = |target: &mut Vec<f64>, z: &[f64], w: f64| {
        let mut base = vec![0usize; m];
        let mut frac = vec![0.0; m];
        for j in 0..m {
            let t = ((z[j] - lo[j]) / step[j]).clamp(0.0, (bins - 1) as f64);
            let i = (t.floor() as usize).min(bins - 2);
            base[j] = i;
            frac[j] = t - i as f64;
        }
        for corner in 0..(1usize << m) {
            let mut ww = w;
            let mut k = 0;
            for j in (0..m).rev() {
                let up = (corner >> j) & 1 == 1;
                ww *= if up { frac[j] } else { 1.0 - frac[j] };
                k = k * bins + base[j] + up as usize;
            }
            target[k] += ww;
        }
    };
    for &i in &cells {
        for j in 0..m {
            z[j] = value(j, i);
        }
        deposit(&mut den, &z, cell_area);
    }
    for p in pattern.points() {
        let i = geom.index_of(*p).ok_or(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() })?;
        for j in 0..m {
            z[j] = value(j, i);
        }
        deposit(&mut num, &z, 1.0);
    }
    for j in 0..m {
        smooth_axis(&mut num, bins, m, j, step[j], bw[j]);
        smooth_axis(&mut den, bins, m, j, step[j], bw[j]);
    }
    let floor = DENOMINATOR_FLOOR * window.area().as_f64();
    let table = BinnedRatio { lo, step, bins, num, den, floor };
    let mut floor_active = false;
    let mut values = vec![F::zero(); geom.len()];
    for &i in &cells {
        for j in 0..m {
            z[j] = value(j, i);
        }
        let (r, hit) = table.ratio(&z);
        floor_active |= hit;
        values[i] = F::lit(r);
    }
    let intensity = base.with_values(values);
    Ok(RhoEstimate { intensity, bandwidths: bw, floor_active, table: Some(table) })
}

/// `m = 0`: the constant `n(X ∩ W)/|W|` on the grid of `like`.
pub fn fit_rho_constant<F: Scalar>(pattern: &PointPattern<F>, like: &ScalarField<F>) -> Result<RhoEstimate<F>> {
    let lambda = F::from_usize_lossy(pattern.len()) / pattern.window().area();
    let intensity = ScalarField::constant(*like.geom(), pattern.window().clone(), lambda)?;
    Ok(RhoEstimate { intensity, bandwidths: Vec::new(), floor_active: false, table: None })
}

/// Gaussian smoothing of a dense `bins^m` array along axis `axis`.
fn smooth_axis(data: &mut [f64], bins: usize, m: usize, axis: usize, step: f64, bw: f64) {
    let reach = ((REACH * bw / step).ceil() as usize).min(bins - 1);
    let norm = 1.0 / (bw * (2.0 * std::f64::consts::PI).sqrt());
    let w: Vec<f64> = (0..=reach).map(|k| norm * (-0.5 * (k as f64 * step / bw).powi(2)).exp()).collect();
    let stride = bins.pow(axis as u32);
    let outer = bins.pow((m - axis - 1) as u32);
    let mut line = vec![0.0; bins];
    let mut out = vec![0.0; bins];
    for o in 0..outer {
        for inner in 0..stride {
            let start = o * stride * bins + inner;
            for (k, v) in line.iter_mut().enumerate() {
                *v = data[start + k * stride];
            }
            for (i, slot) in out.iter_mut().enumerate() {
                let a = i.saturating_sub(reach);
                let b = (i + reach).min(bins - 1);
                let mut s = 0.0;
                for (k, &v) in line.iter().enumerate().take(b + 1).skip(a) {
                    s += w[i.abs_diff(k)] * v;
                }
                *slot = s;
            }
            for (k, &v) in out.iter().enumerate() {
                data[start + k * stride] = v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Rect, Window};
    use crate::pointsim::simulate_poisson;
    use crate::raster::GridGeometry;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridGeometry<f64> {
        GridGeometry::tiling(&Rect::unit(), n).unwrap()
    }

    #[test]
    fn constant_case() {
        let g = grid(8);
        let pat = PointPattern::new(vec![Point::new(0.1, 0.1), Point::new(0.5, 0.2)], Window::unit_square()).unwrap();
        let like = ScalarField::constant(g, Window::unit_square(), 0.0).unwrap();
        let r = fit_rho_constant(&pat, &like).unwrap();
        assert!(r.intensity().values().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn rejects_degenerate_and_too_many() {
        let g = grid(8);
        let w = Window::unit_square();
        let pat = PointPattern::new(vec![Point::new(0.1, 0.1)], w.clone()).unwrap();
        let c = ScalarField::constant(g, w.clone(), 4.0).unwrap();
        assert!(matches!(fit_rho(&pat, &[&c], None), Err(Error::DegenerateCovariate(0))));
        let x = ScalarField::from_fn(g, w, |p| p.x).unwrap();
        assert!(matches!(fit_rho(&pat, &[&x, &x, &x, &x], None), Err(Error::TooManyCovariates { got: 4, .. })));
    }

    #[test]
    fn parabola_recovered() {
        let g = grid(64);
        let w = Window::unit_square();
        let lam = ScalarField::from_fn(g, w.clone(), |p| 400.0 * (1.0 - 4.0 * (p.x - 0.5).powi(2))).unwrap();
        let x = ScalarField::from_fn(g, w, |p| p.x).unwrap();
        let (mut mid, mut edge) = (0.0, 0.0);
        for s in 0..100 {
            let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
            let r = fit_rho(&pat, &[&x], None).unwrap();
            mid += r.rho(&[0.5]).unwrap();
            edge += 0.5 * (r.rho(&[0.05]).unwrap() + r.rho(&[0.95]).unwrap());
            let mass = r.intensity().integral();
            assert!((mass / pat.len() as f64 - 1.0).abs() < 0.15, "mass {mass} vs {}", pat.len());
        }
        assert!((mid / 100.0 / 400.0 - 1.0).abs() < 0.1, "mid {}", mid / 100.0);
        assert!(edge / 100.0 < 100.0, "edge {}", edge / 100.0);
    }

    #[test]
    fn affine_rescaling_invariance() {
        let g = grid(32);
        let w = Window::unit_square();
        let lam = ScalarField::from_fn(g, w.clone(), |p| 100.0 * (1.0 + p.x * p.y)).unwrap();
        let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c1 = ScalarField::from_fn(g, w.clone(), |p| (3.0 * p.x).sin() + p.y).unwrap();
        let c2 = ScalarField::from_fn(g, w, |p| p.x * p.y).unwrap();
        let a = fit_rho(&pat, &[&c1, &c2], Some(&[0.2, 0.1])).unwrap();
        let c1s = c1.map(|v| 3.0 * v - 7.0);
        let c2s = c2.map(|v| -0.5 * v + 1.0);
        let b = fit_rho(&pat, &[&c1s, &c2s], Some(&[0.6, 0.05])).unwrap();
        for (x, y) in a.intensity().values().iter().zip(b.intensity().values()) {
            assert_relative_eq!(x, y, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn three_covariates_nonnegative() {
        let g = grid(32);
        let w = Window::unit_square();
        let lam = ScalarField::constant(g, w.clone(), 150.0).unwrap();
        let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let c1 = ScalarField::from_fn(g, w.clone(), |p| p.x).unwrap();
        let c2 = ScalarField::from_fn(g, w.clone(), |p| p.y).unwrap();
        let c3 = ScalarField::from_fn(g, w, |p| (5.0 * p.x * p.y).cos()).unwrap();
        let r = fit_rho(&pat, &[&c1, &c2, &c3], None).unwrap();
        assert!(r.intensity().values().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(r.bandwidths().len(), 3);
    }
}
