//! Residual measures and smoothed residual fields for parametric,
//! nonparametric and constant intensity estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{PointPattern, Window};
use crate::loglin::fit_loglinear;
use crate::raster::ScalarField;
use crate::rhohat::{fit_rho, fit_rho_constant};
use crate::scalar::Scalar;
use crate::smooth::{KernelSpec, Smoother};

/// Relative bound on `|R̃(W)|` above which the mass diagnostic is raised.
pub const MASS_TOLERANCE: f64 = 0.15;

/// How the intensity of the nuisance model is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    Parametric,
    Nonparametric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Provenance {
    Parametric { coefficients: Vec<f64> },
    Nonparametric { bandwidths: Vec<f64>, floor_active: bool },
    Constant { value: f64 },
    Supplied,
}

/// Fitted intensity `λ̂` on the grid together with how it was obtained.
#[derive(Debug, Clone)]
pub struct IntensityEstimate<F: Scalar> {
    pub field: ScalarField<F>,
    pub provenance: Provenance,
}

impl<F: Scalar> IntensityEstimate<F> {
    pub fn supplied(field: ScalarField<F>) -> Self {
        Self { field, provenance: Provenance::Supplied }
    }

    /// `n(X ∩ W)/|W|` on the grid of `like`.
    pub fn constant(pattern: &PointPattern<F>, like: &ScalarField<F>) -> Result<Self> {
        let r = fit_rho_constant(pattern, like)?;
        let value = (F::from_usize_lossy(pattern.len()) / pattern.window().area()).as_f64();
        Ok(Self { field: r.into_intensity(), provenance: Provenance::Constant { value } })
    }

    /// Estimate from the nuisance covariates; with none, the constant
    /// estimate regardless of `kind`.
    pub fn fit(
        pattern: &PointPattern<F>,
        nuisance: &[&ScalarField<F>],
        kind: ResidualKind,
        like: &ScalarField<F>,
    ) -> Result<Self> {
        if nuisance.is_empty() {
            return Self::constant(pattern, like);
        }
        match kind {
            ResidualKind::Nonparametric => {
                let r = fit_rho(pattern, nuisance, None)?;
                let provenance =
                    Provenance::Nonparametric { bandwidths: r.bandwidths().to_vec(), floor_active: r.floor_active() };
                Ok(Self { field: r.into_intensity(), provenance })
            }
            ResidualKind::Parametric => {
                let fit = fit_loglinear(pattern, nuisance, like)?;
                Ok(Self { provenance: Provenance::Parametric { coefficients: fit.coefficients.clone() }, field: fit.intensity })
            }
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match self.provenance {
            Provenance::Constant { value } => Some(value),
            _ => None,
        }
    }
}

/// Signed measure `R(B) = n(X ∩ B) − ∫_B λ̂`.
#[derive(Debug, Clone)]
pub struct ResidualMeasure<'a, F: Scalar> {
    pattern: &'a PointPattern<F>,
    intensity: &'a IntensityEstimate<F>,
}

impl<'a, F: Scalar> ResidualMeasure<'a, F> {
    pub fn evaluate(&self, b: &Window<F>) -> f64 {
        self.pattern.count_in(b) as f64 - self.intensity.field.integrate(b).as_f64()
    }

    /// `R(W)`.
    pub fn total(&self) -> f64 {
        self.pattern.len() as f64 - self.intensity.field.integral().as_f64()
    }

    /// True when `|R(W)|` exceeds the mass tolerance for a nonparametric
    /// estimate.
    pub fn mass_flag(&self) -> bool {
        matches!(self.intensity.provenance, Provenance::Nonparametric { .. })
            && self.total().abs() > MASS_TOLERANCE * self.pattern.len() as f64
    }

    pub fn intensity(&self) -> &IntensityEstimate<F> {
        self.intensity
    }

    pub fn pattern(&self) -> &PointPattern<F> {
        self.pattern
    }
}

pub fn residual_measure<'a, F: Scalar>(
    pattern: &'a PointPattern<F>,
    intensity: &'a IntensityEstimate<F>,
) -> ResidualMeasure<'a, F> {
    ResidualMeasure { pattern, intensity }
}

/// Smoothed residual field `s(u)` or `s̃(u)`.
#[derive(Debug, Clone)]
pub struct ResidualField<F: Scalar> {
    pub field: ScalarField<F>,
    pub kernel: KernelSpec,
    pub provenance: Provenance,
}

/// `(1/e(u)) [Σ k(u − x_i) − ∫_W k(u − v) λ̂(v) dv]`; for a constant
/// estimate this is the kernel intensity minus that constant.
pub fn smoothed_residual_field<F: Scalar>(
    pattern: &PointPattern<F>,
    intensity: &IntensityEstimate<F>,
    smoother: &Smoother<F>,
) -> Result<ResidualField<F>> {
    if pattern.window() != smoother.window() {
        return Err(Error::GridMismatch("pattern window differs from the smoothing window".into()));
    }
    let field = match intensity.constant_value() {
        Some(c) => {
            let c = F::lit(c);
            let k = smoother.kernel_intensity(pattern)?;
            let mask = k.mask().to_vec();
            let v = k.values().iter().zip(&mask).map(|(&x, &m)| if m { x - c } else { F::zero() }).collect();
            k.with_values(v)
        }
        None => smoother.residual_field(pattern, &intensity.field)?,
    };
    Ok(ResidualField { field, kernel: smoother.kernel(), provenance: intensity.provenance.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point, Rect};
    use crate::pointsim::simulate_poisson;
    use crate::raster::GridGeometry;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridGeometry<f64> {
        GridGeometry::tiling(&Rect::unit(), n).unwrap()
    }

    #[test]
    fn empty_pattern_residual_is_minus_mass() {
        let w = Window::unit_square();
        let lam = ScalarField::constant(grid(16), w.clone(), 3.0).unwrap();
        let est = IntensityEstimate::supplied(lam);
        let pat = PointPattern::empty(w.clone());
        assert_abs_diff_eq!(residual_measure(&pat, &est).evaluate(&w), -3.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_cancellation() {
        let w = Window::unit_square();
        let like = ScalarField::constant(grid(16), w.clone(), 0.0).unwrap();
        let pts = (0..10).map(|i| Point::new(0.05 + 0.09 * i as f64, 0.5)).collect();
        let pat = PointPattern::new(pts, w.clone()).unwrap();
        let est = IntensityEstimate::constant(&pat, &like).unwrap();
        assert_abs_diff_eq!(residual_measure(&pat, &est).total(), 0.0, epsilon = 1e-6);
    }

    #[test]
    fn constant_provenance_is_kernel_minus_scalar() {
        let g = grid(32);
        let w = Window::unit_square();
        let lam = ScalarField::constant(g, w.clone(), 120.0).unwrap();
        let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let sm = Smoother::new(g, w, KernelSpec::new(0.1).unwrap()).unwrap();
        let est = IntensityEstimate::constant(&pat, &lam).unwrap();
        let r = smoothed_residual_field(&pat, &est, &sm).unwrap();
        let k = sm.kernel_intensity(&pat).unwrap();
        let c = pat.len() as f64;
        for (a, b) in r.field.values().iter().zip(k.values()) {
            assert_eq!(*a, *b - c);
        }
    }

    #[test]
    fn atomic_density_gives_zero_field() {
        // λ̂ equal to the binned point masses cancels the atomic part
        let g = grid(32);
        let w = Window::unit_square();
        let lam = ScalarField::constant(g, w.clone(), 100.0).unwrap();
        let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let mut v = vec![0.0; g.len()];
        for p in pat.points() {
            v[g.index_of(*p).unwrap()] += 1.0 / g.cell_area();
        }
        let est = IntensityEstimate::supplied(ScalarField::new(g, w.clone(), v).unwrap());
        let sm = Smoother::new(g, w, KernelSpec::new(0.07).unwrap()).unwrap();
        let r = smoothed_residual_field(&pat, &est, &sm).unwrap();
        assert!(r.field.values().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn nonparametric_mass_is_calibrated() {
        let g = grid(64);
        let w = Window::unit_square();
        let x = ScalarField::from_fn(g, w.clone(), |p| p.x).unwrap();
        let lam = x.map(|v| 150.0 * (1.0 + v));
        let pat = simulate_poisson(&lam, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let est = IntensityEstimate::fit(&pat, &[&x], ResidualKind::Nonparametric, &x).unwrap();
        assert!(!residual_measure(&pat, &est).mass_flag());
    }
}
