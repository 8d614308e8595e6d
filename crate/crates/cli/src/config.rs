//! Run configuration documents, one TOML file per run.
//!
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use shiftcov::depmeasure::{BandwidthChoice, DEFAULT_SAMPLING_POINTS};
use shiftcov::experiment::{ReplicateConfig, DEFAULT_GRID};
use shiftcov::pointsim::catalog::ModelParams;
use shiftcov::residual::ResidualKind;
use shiftcov::shifttest::ShiftTestConfig;
use shiftcov::{Error, Point, Result, Window};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum WindowSpec {
    /// `[x0, y0, x1, y1]`
    Rect([f64; 4]),
    /// Vertices `[[x, y], ...]`, either orientation.
    Polygon(Vec<[f64; 2]>),
}

impl WindowSpec {
    pub fn build(&self) -> Result<Window> {
        match self {
            WindowSpec::Rect([x0, y0, x1, y1]) => Window::rect(*x0, *y0, *x1, *y1),
            WindowSpec::Polygon(v) => Window::polygon(v.iter().map(|[x, y]| Point::new(*x, *y)).collect()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateFile {
    pub name: String,
    /// Esri ASCII grid.
    pub grid: PathBuf,
}

/// Observed data: a pattern and covariate grids on a common window.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    /// Defaults to the extent of the first covariate grid.
    #[serde(default)]
    pub window: Option<WindowSpec>,
    /// CSV with columns `x` and `y`.
    pub points: PathBuf,
    pub covariates: Vec<CovariateFile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRun {
    pub interest: String,
    #[serde(default)]
    pub nuisance: Vec<String>,
    pub shift: ShiftTestConfig,
    pub data: DataSpec,
}

fn default_tau_bandwidth() -> BandwidthChoice {
    BandwidthChoice::Default
}
fn default_partial_bandwidth() -> BandwidthChoice {
    BandwidthChoice::Adaptive(Vec::new())
}
fn default_residuals() -> ResidualKind {
    ResidualKind::Nonparametric
}
fn default_sampling() -> usize {
    DEFAULT_SAMPLING_POINTS
}

/// τ̂ for every covariate and τ̂ₚ of each against all the others.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrRun {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_residuals")]
    pub residuals: ResidualKind,
    /// Smoothing bandwidth of τ̂; adaptive selection is not defined for it.
    #[serde(default = "default_tau_bandwidth")]
    pub tau_bandwidth: BandwidthChoice,
    #[serde(default = "default_partial_bandwidth")]
    pub partial_bandwidth: BandwidthChoice,
    #[serde(default = "default_sampling")]
    pub sampling_points: usize,
    pub data: DataSpec,
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectRun {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Subset of the data covariates to start from; all of them by default.
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
    pub shift: ShiftTestConfig,
    pub data: DataSpec,
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRun {
    pub model: String,
    #[serde(default)]
    pub params: ModelParams,
    #[serde(default)]
    pub seed: u64,
    /// Grid columns on the unit square.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub gibbs_steps: Option<usize>,
    /// Also write the latent fields `Z1, Z2, …` and the intensity or trend.
    #[serde(default)]
    pub write_latent: bool,
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_replicate(path: &Path) -> Result<ReplicateConfig> {
    load(path)
}

/// `p` relative to the config directory unless absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
