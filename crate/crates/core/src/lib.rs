//! Nonparametric tests of covariate significance for spatial point patterns.
//!
//! A pattern's dependence on a covariate of interest is measured after
//! accounting for nuisance covariates, either through the covariate-weighted
//! residual (CWR) or through Kendall's partial τ̂ₚ against a smoothed
//! residual field. Significance comes from random-shift Monte Carlo tests
//! with torus or variance correction.
//!
//! Numerical types are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod depmeasure;
pub mod error;
pub mod experiment;
mod fft;
pub mod geom;
pub mod io;
pub mod loglin;
pub mod pointsim;
pub mod randfield;
pub mod raster;
pub mod residual;
pub mod rhohat;
pub mod rng;
pub mod scalar;
pub mod select;
pub mod shifttest;
pub mod smooth;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point = geom::Point<f64>;
pub type ShiftVector = geom::ShiftVector<f64>;
pub type Rect = geom::Rect<f64>;
pub type Window = geom::Window<f64>;
pub type PointPattern = geom::PointPattern<f64>;
pub type GridGeometry = raster::GridGeometry<f64>;
pub type ScalarField = raster::ScalarField<f64>;
pub type Smoother = smooth::Smoother<f64>;
pub type SmootherCache = smooth::SmootherCache<f64>;
pub type IntensityEstimate = residual::IntensityEstimate<f64>;
pub type LogLinFit = loglin::LogLinFit<f64>;
pub type RhoEstimate = rhohat::RhoEstimate<f64>;
pub type SamplingPoints = depmeasure::SamplingPoints<f64>;
pub type Realization = pointsim::Realization<f64>;
