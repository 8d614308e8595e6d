//! Stationary Gaussian random fields with exponential covariance, simulated
//! by circulant embedding on a grid padded to twice its size in each axis.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::geom::Window;
use crate::raster::{GridGeometry, ScalarField};
use crate::scalar::Scalar;

/// Clipped negative spectral mass above this fraction aborts the embedding.
pub const MAX_CLIPPED_MASS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussFieldSpec {
    #[serde(default)]
    pub mean: f64,
    #[serde(default = "one")]
    pub variance: f64,
    /// Scale `φ` of `c(r) = variance · exp(−r/φ)`.
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl GaussFieldSpec {
    pub fn new(mean: f64, variance: f64, scale: f64) -> Result<Self> {
        let s = Self { mean, variance, scale };
        s.validate()?;
        Ok(s)
    }

    /// Centred, unit-variance field.
    pub fn standard(scale: f64) -> Self {
        Self { mean: 0.0, variance: 1.0, scale }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance >= 0.0) || !self.variance.is_finite() {
            return Err(Error::InvalidParameter("field variance must be finite and nonnegative".into()));
        }
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::InvalidParameter("covariance scale must be positive".into()));
        }
        if !self.mean.is_finite() {
            return Err(Error::InvalidParameter("field mean must be finite".into()));
        }
        Ok(())
    }

    pub fn covariance(&self, r: f64) -> f64 {
        self.variance * (-r / self.scale).exp()
    }
}

/// Reusable sampler: the embedding spectrum is computed once per
/// specification and grid.
pub struct GrfSampler<F: Scalar> {
    spec: GaussFieldSpec,
    geom: GridGeometry<F>,
    window: Window<F>,
    fft: Fft2<F>,
    /// `sqrt(λ_k / M)` for each embedding frequency.
    amplitude: Vec<F>,
    clipped_mass: f64,
}

impl<F: Scalar> std::fmt::Debug for GrfSampler<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GrfSampler")
            .field("spec", &self.spec)
            .field("geom", &self.geom)
            .field("clipped_mass", &self.clipped_mass)
            .finish()
    }
}

impl<F: Scalar> GrfSampler<F> {
    pub fn new(spec: GaussFieldSpec, geom: GridGeometry<F>, window: Window<F>) -> Result<Self> {
        spec.validate()?;
        if !geom.covers(&window) {
            return Err(Error::GridMismatch("grid does not cover the window".into()));
        }
        let (mx, my) = (2 * geom.ncols, 2 * geom.nrows);
        let fft = Fft2::new(mx, my);
        let h = geom.cell.as_f64();
        let mut buf = vec![Complex::new(F::zero(), F::zero()); mx * my];
        for j in 0..my {
            let dy = j.min(my - j) as f64 * h;
            for i in 0..mx {
                let dx = i.min(mx - i) as f64 * h;
                buf[j * mx + i].re = F::lit(spec.covariance(dx.hypot(dy)));
            }
        }
        fft.forward(&mut buf);
        let (mut neg, mut total) = (0.0, 0.0);
        for z in &buf {
            let l = z.re.as_f64();
            total += l.abs();
            if l < 0.0 {
                neg -= l;
            }
        }
        let clipped_mass = if total > 0.0 { neg / total } else { 0.0 };
        if clipped_mass > MAX_CLIPPED_MASS {
            return Err(Error::EmbeddingFailed { clipped: clipped_mass });
        }
        let m = (mx * my) as f64;
        let amplitude = buf.iter().map(|z| F::lit((z.re.as_f64().max(0.0) / m).sqrt())).collect();
        Ok(Self { spec, geom, window, fft, amplitude, clipped_mass })
    }

    /// Fraction of the spectral mass removed by clipping negative eigenvalues.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped_mass
    }

    pub fn spec(&self) -> &GaussFieldSpec {
        &self.spec
    }

    /// Two independent realizations from one transform (real and imaginary
    /// parts).
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (ScalarField<F>, ScalarField<F>) {
        let mut buf: Vec<Complex<F>> = self
            .amplitude
            .iter()
            .map(|&a| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(a * F::lit(re), a * F::lit(im))
            })
            .collect();
        self.fft.forward(&mut buf);
        let (nx, ny) = (self.geom.ncols, self.geom.nrows);
        let mx = 2 * nx;
        let mean = F::lit(self.spec.mean);
        let mut a = Vec::with_capacity(nx * ny);
        let mut b = Vec::with_capacity(nx * ny);
        for r in 0..ny {
            for c in 0..nx {
                let z = buf[r * mx + c];
                a.push(mean + z.re);
                b.push(mean + z.im);
            }
        }
        let fa = ScalarField::new(self.geom, self.window.clone(), a).expect("finite field");
        let fb = fa.with_values(b);
        (fa, fb)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ScalarField<F> {
        self.sample_pair(rng).0
    }

    /// `k` independent realizations.
    pub fn sample_many<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<ScalarField<F>> {
        let mut out = Vec::with_capacity(k + 1);
        while out.len() < k {
            let (a, b) = self.sample_pair(rng);
            out.push(a);
            out.push(b);
        }
        out.truncate(k);
        out
    }
}

pub fn simulate_grf<F: Scalar, R: Rng + ?Sized>(
    spec: GaussFieldSpec,
    geom: GridGeometry<F>,
    window: Window<F>,
    rng: &mut R,
) -> Result<ScalarField<F>> {
    Ok(GrfSampler::new(spec, geom, window)?.sample(rng))
}
