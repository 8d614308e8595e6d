//! Log-linear Poisson intensity fits by Berman–Turner quadrature on the
//! covariate grid, with Wald tests.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::geom::PointPattern;
use crate::raster::ScalarField;
use crate::scalar::Scalar;

/// Largest admissible condition number of the weighted design.
pub const MAX_CONDITION: f64 = 1e8;
/// Largest admissible standardized coefficient.
pub const MAX_COEFFICIENT: f64 = 50.0;
const GRADIENT_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct LogLinFit<F: Scalar> {
    /// `β₀, β₁, …, β_m` in original covariate units.
    pub coefficients: Vec<f64>,
    /// Inverse negative Hessian at `β̂`, original units.
    pub covariance: Vec<Vec<f64>>,
    pub intensity: ScalarField<F>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogLinSummary {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub p_values: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub loglik: f64,
}

impl<F: Scalar> LogLinFit<F> {
    pub fn std_error(&self, which: usize) -> f64 {
        self.covariance[which][which].max(0.0).sqrt()
    }

    /// Two-sided normal p-value for `β_which = 0` (index 0 is the intercept).
    pub fn wald_p(&self, which: usize) -> Result<f64> {
        if which >= self.coefficients.len() {
            return Err(Error::InvalidParameter(format!(
                "coefficient index {which} out of range (fit has {})",
                self.coefficients.len()
            )));
        }
        let b = self.coefficients[which];
        if b == 0.0 {
            return Ok(1.0);
        }
        let z = b / self.std_error(which);
        Ok(erfc(z.abs() / std::f64::consts::SQRT_2))
    }

    pub fn summary(&self) -> LogLinSummary {
        let k = self.coefficients.len();
        LogLinSummary {
            coefficients: self.coefficients.clone(),
            std_errors: (0..k).map(|i| self.std_error(i)).collect(),
            p_values: (0..k).map(|i| self.wald_p(i).unwrap_or(f64::NAN)).collect(),
            iterations: self.iterations,
            gradient_norm: self.gradient_norm,
            loglik: self.loglik,
        }
    }
}

pub fn wald_test<F: Scalar>(fit: &LogLinFit<F>, which: usize) -> Result<f64> {
    fit.wald_p(which)
}

/// Quadrature design: rows are window cells, then data points.
struct Design {
    /// Standardized covariates with a leading 1, row-major `k` wide.
    cells: Vec<f64>,
    weights: Vec<f64>,
    data_sum: Vec<f64>,
    k: usize,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Design {
    fn build<F: Scalar>(pattern: &PointPattern<F>, covariates: &[&ScalarField<F>], like: &ScalarField<F>) -> Result<Self> {
        let m = covariates.len();
        let k = m + 1;
        let geom = like.geom();
        let mask = like.mask();
        let area = geom.cell_area().as_f64();
        let idx: Vec<usize> = (0..geom.len()).filter(|&i| mask[i]).collect();
        let mut mean = vec![0.0; m];
        let mut sd = vec![1.0; m];
        for (j, c) in covariates.iter().enumerate() {
            if !c.geom().same_as(geom) {
                return Err(Error::GridMismatch("covariates live on different grids".into()));
            }
            let n = idx.len() as f64;
            let mu = idx.iter().map(|&i| c.values()[i].as_f64()).sum::<f64>() / n;
            let var = idx.iter().map(|&i| (c.values()[i].as_f64() - mu).powi(2)).sum::<f64>() / n;
            if !(var.sqrt() > 1e-12 * mu.abs().max(1e-300)) {
                return Err(Error::SingularDesign(format!("covariate {} is constant over the window", j + 1)));
            }
            mean[j] = mu;
            sd[j] = var.sqrt();
        }
        let row = |i: usize, out: &mut Vec<f64>| {
            out.push(1.0);
            for (j, c) in covariates.iter().enumerate() {
                out.push((c.values()[i].as_f64() - mean[j]) / sd[j]);
            }
        };
        let mut cells = Vec::with_capacity(idx.len() * k);
        for &i in &idx {
            row(i, &mut cells);
        }
        let mut data_sum = vec![0.0; k];
        let mut tmp = Vec::with_capacity(k);
        for p in pattern.points() {
            let i = geom.index_of(*p).ok_or(Error::OutOfDomain { x: p.x.as_f64(), y: p.y.as_f64() })?;
            tmp.clear();
            row(i, &mut tmp);
            for (s, v) in data_sum.iter_mut().zip(&tmp) {
                *s += v;
            }
        }
        Ok(Self { cells, weights: vec![area; idx.len()], data_sum, k, mean, sd })
    }

    /// `(ℓ, ∇ℓ, −∇²ℓ)` at standardized coefficients `g`.
    fn eval(&self, g: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let k = self.k;
        let mut ll: f64 = self.data_sum.iter().zip(g).map(|(a, b)| a * b).sum();
        let mut grad = DVector::from_column_slice(&self.data_sum);
        let mut info = DMatrix::zeros(k, k);
        for (row, &w) in self.cells.chunks_exact(k).zip(&self.weights) {
            let eta: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
            let mu = w * eta.exp();
            ll -= mu;
            for a in 0..k {
                grad[a] -= mu * row[a];
                for b in 0..=a {
                    info[(a, b)] += mu * row[a] * row[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        (ll, grad, info)
    }

    fn loglik(&self, g: &[f64]) -> f64 {
        let k = self.k;
        let mut ll: f64 = self.data_sum.iter().zip(g).map(|(a, b)| a * b).sum();
        for (row, &w) in self.cells.chunks_exact(k).zip(&self.weights) {
            let eta: f64 = row.iter().zip(g).map(|(a, b)| a * b).sum();
            ll -= w * eta.exp();
        }
        ll
    }

    /// Jacobian of original coefficients with respect to standardized ones.
    fn jacobian(&self) -> DMatrix<f64> {
        let k = self.k;
        let mut a = DMatrix::identity(k, k);
        for j in 1..k {
            a[(j, j)] = 1.0 / self.sd[j - 1];
            a[(0, j)] = -self.mean[j - 1] / self.sd[j - 1];
        }
        a
    }

    fn to_standard(&self, beta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.k];
        g[0] = beta[0];
        for j in 1..self.k {
            g[j] = beta[j] * self.sd[j - 1];
            g[0] += beta[j] * self.mean[j - 1];
        }
        g
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let (lo, hi) = eig.eigenvalues.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Quadrature log-likelihood `Σ log λ(x_i; β) − Σ_cells a·λ(c; β)` in
/// original covariate units.
pub fn quadrature_loglik<F: Scalar>(
    pattern: &PointPattern<F>,
    covariates: &[&ScalarField<F>],
    like: &ScalarField<F>,
    beta: &[f64],
) -> Result<f64> {
    let d = Design::build(pattern, covariates, like)?;
    if beta.len() != d.k {
        return Err(Error::LengthMismatch(beta.len(), d.k));
    }
    Ok(d.loglik(&d.to_standard(beta)))
}

/// Maximum quadrature-likelihood fit of `λ(u) = exp{β₀ + Σ β_j C_j(u)}`.
///
/// `like` supplies the grid and window when `covariates` is empty.
pub fn fit_loglinear<F: Scalar>(
    pattern: &PointPattern<F>,
    covariates: &[&ScalarField<F>],
    like: &ScalarField<F>,
) -> Result<LogLinFit<F>> {
    let n = pattern.len();
    if n == 0 {
        return Err(Error::NonConvergence("no points: the intercept diverges to -inf".into()));
    }
    let area = pattern.window().area().as_f64();
    if covariates.is_empty() {
        let b0 = (n as f64 / area).ln();
        let intensity = ScalarField::constant(*like.geom(), pattern.window().clone(), F::lit(n as f64 / area))?;
        return Ok(LogLinFit {
            coefficients: vec![b0],
            covariance: vec![vec![1.0 / n as f64]],
            intensity,
            iterations: 0,
            gradient_norm: 0.0,
            loglik: n as f64 * b0 - n as f64,
        });
    }
    let d = Design::build(pattern, covariates, like)?;
    let k = d.k;
    let mut g = vec![0.0; k];
    g[0] = (n as f64 / d.weights.iter().sum::<f64>()).ln();
    let (mut ll, mut grad, mut info) = d.eval(&g);
    let cond = condition_number(&info);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularDesign(format!("weighted design condition number {cond:.3e} exceeds 1e8")));
    }
    let mut iterations = 0;
    while grad.amax() >= GRADIENT_TOL {
        if iterations >= MAX_ITER {
            return Err(Error::NonConvergence(format!(
                "gradient norm {:.3e} after {MAX_ITER} Newton steps",
                grad.amax()
            )));
        }
        iterations += 1;
        let step = info
            .clone()
            .cholesky()
            .ok_or_else(|| Error::SingularDesign("information matrix is not positive definite".into()))?
            .solve(&grad);
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = g.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let lt = d.loglik(&trial);
            if lt >= ll - 1e-12 * ll.abs() || t < 1e-10 {
                g = trial;
                break;
            }
            t *= 0.5;
        }
        if g[1..].iter().any(|v| v.abs() > MAX_COEFFICIENT) || !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence("a standardized coefficient exceeded +-50".into()));
        }
        let prev = ll;
        (ll, grad, info) = d.eval(&g);
        if (ll - prev).abs() <= 1e-15 * ll.abs() && t < 1e-10 {
            break;
        }
    }
    // a vanishing information at the optimum means the likelihood keeps
    // increasing along a direction: separation
    let cond = condition_number(&info);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::NonConvergence(format!("information condition number {cond:.3e} at the optimum (separation)")));
    }
    let cov_std = info
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign("information matrix is not invertible".into()))?;
    let jac = d.jacobian();
    let beta = &jac * DVector::from_column_slice(&g);
    let cov = &jac * cov_std * jac.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let values = (0..like.geom().len())
        .map(|i| {
            let eta = coefficients[0]
                + covariates.iter().enumerate().map(|(j, c)| coefficients[j + 1] * c.values()[i].as_f64()).sum::<f64>();
            F::lit(eta.exp())
        })
        .collect::<Vec<F>>();
    let mask = like.mask();
    let values = values.into_iter().zip(mask).map(|(v, &m)| if m { v } else { F::zero() }).collect();
    let intensity = ScalarField::new(*like.geom(), pattern.window().clone(), values)?;
    Ok(LogLinFit {
        coefficients,
        covariance: (0..k).map(|a| (0..k).map(|b| cov[(a, b)]).collect()).collect(),
        intensity,
        iterations,
        gradient_norm: grad.amax(),
        loglik: ll,
    })
}
