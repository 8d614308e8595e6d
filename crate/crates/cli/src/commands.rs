use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;
use shiftcov::depmeasure::{tau_hat, tau_partial, BandwidthChoice, DependenceResult, SamplingPoints};
use shiftcov::experiment::{replicate, unit_grid};
use shiftcov::io::{read_ascii_grid, read_points_csv, write_ascii_grid, write_points_csv};
use shiftcov::pointsim::catalog;
use shiftcov::pointsim::Simulator;
use shiftcov::rng::SeedStream;
use shiftcov::select::{backward_select, SelectionTrace};
use shiftcov::shifttest::run_shift_test;
use shiftcov::smooth::default_bandwidth;
use shiftcov::{Error, PointPattern, ScalarField, SmootherCache, Window};

use crate::config::{self, CorrRun, DataSpec, SelectRun, SimulateRun, TestRun};

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input data or configuration; exit code 2.
    Data(String),
    /// Failure inside the library; exit code 1.
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_data_error() {
            CliError::Data(e.to_string())
        } else {
            CliError::Internal(e.to_string())
        }
    }
}

impl CliError {
    fn about(path: &Path) -> impl Fn(Error) -> CliError + '_ {
        move |e| match CliError::from(e) {
            CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
            CliError::Internal(m) => CliError::Internal(format!("{}: {m}", path.display())),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Where a command writes its report; `None` is stdout.
pub struct Output {
    pub path: Option<PathBuf>,
}

impl Output {
    fn write(&self, text: &str) -> CliResult<()> {
        match &self.path {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        s.push('\n');
        self.write(&s)
    }
}

pub struct Data {
    pub pattern: PointPattern,
    pub covariates: Vec<(String, ScalarField)>,
}

impl Data {
    fn get(&self, name: &str) -> CliResult<&ScalarField> {
        self.covariates
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f)
            .ok_or_else(|| CliError::Data(format!("no covariate named '{name}' in [data]")))
    }

    fn cache(&self) -> SmootherCache {
        let f = &self.covariates[0].1;
        SmootherCache::new(*f.geom(), f.window().clone())
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_data(spec: &DataSpec, base: &Path) -> CliResult<Data> {
    if spec.covariates.is_empty() {
        return Err(CliError::Data("[data] lists no covariates".into()));
    }
    let mut grids = Vec::new();
    for c in &spec.covariates {
        if grids.iter().any(|(n, _, _): &(String, _, _)| *n == c.name) {
            return Err(CliError::Data(format!("covariate '{}' is listed twice", c.name)));
        }
        let path = config::resolve(base, &c.grid);
        let grid = read_ascii_grid::<f64, _>(open(&path)?).map_err(CliError::about(&path))?;
        grids.push((c.name.clone(), path, grid));
    }
    let window = match &spec.window {
        Some(w) => w.build()?,
        None => Window::Rect(grids[0].2.geom.bounds()),
    };
    let first = grids[0].2.geom;
    let first_path = grids[0].1.clone();
    let mut covariates = Vec::new();
    for (name, path, grid) in grids {
        if !grid.geom.same_as(&first) {
            return Err(CliError::Data(format!(
                "{}: grid geometry differs from {}",
                path.display(),
                first_path.display()
            )));
        }
        covariates.push((name, grid.into_field(window.clone()).map_err(CliError::about(&path))?));
    }
    let points = config::resolve(base, &spec.points);
    let pattern = read_points_csv(open(&points)?, &window).map_err(CliError::about(&points))?;
    Ok(Data { pattern, covariates })
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn cmd_test(config: &Path, seed: Option<u64>, out: &Output) -> CliResult<()> {
    let mut run: TestRun = config::load(config)?;
    if let Some(s) = seed {
        run.shift.seed = s;
    }
    let data = load_data(&run.data, &base_dir(config))?;
    let interest = data.get(&run.interest)?;
    let nuisance = run.nuisance.iter().map(|n| data.get(n)).collect::<CliResult<Vec<_>>>()?;
    log::info!("{} points, {} nuisance covariates, {} shifts", data.pattern.len(), nuisance.len(), run.shift.n_shifts);
    let result = run_shift_test(&data.pattern, &nuisance, interest, &run.shift)?;
    log::info!("p = {}", result.p_value);
    out.json(&result)
}

#[derive(Serialize)]
struct CorrRow {
    name: String,
    tau: DependenceResult,
    /// Covariates treated as nuisance for `tau_partial`.
    nuisance: Vec<String>,
    tau_partial: DependenceResult,
}

#[derive(Serialize)]
struct CorrReport {
    n_points: usize,
    window_area: f64,
    seed: u64,
    covariates: Vec<CorrRow>,
}

pub fn cmd_corr(config: &Path, seed: Option<u64>, out: &Output) -> CliResult<()> {
    let mut run: CorrRun = config::load(config)?;
    if let Some(s) = seed {
        run.seed = s;
    }
    let data = load_data(&run.data, &base_dir(config))?;
    let window = data.pattern.window().clone();
    let sampling = SamplingPoints::uniform(&window, run.sampling_points, &mut SeedStream::new(run.seed).rng("sampling", 0));
    let cache = data.cache();
    let bw = match run.tau_bandwidth {
        BandwidthChoice::Default => default_bandwidth(&window),
        BandwidthChoice::Fixed(b) => b,
        BandwidthChoice::Adaptive(_) => {
            return Err(CliError::Data("tau_bandwidth cannot be adaptive; the adaptive rule needs nuisance covariates".into()))
        }
    };
    let smoother = cache.get(bw)?;
    let mut rows = Vec::new();
    for (name, field) in &data.covariates {
        let others: Vec<&(String, ScalarField)> = data.covariates.iter().filter(|(n, _)| n != name).collect();
        let nuisance: Vec<&ScalarField> = others.iter().map(|(_, f)| f).collect();
        rows.push(CorrRow {
            name: name.clone(),
            tau: tau_hat(&data.pattern, field, &smoother, &sampling)?,
            nuisance: others.iter().map(|(n, _)| n.clone()).collect(),
            tau_partial: tau_partial(
                &data.pattern,
                &nuisance,
                field,
                run.residuals,
                &run.partial_bandwidth,
                &sampling,
                &cache,
            )?,
        });
    }
    out.json(&CorrReport { n_points: data.pattern.len(), window_area: window.area(), seed: run.seed, covariates: rows })
}

#[derive(Serialize)]
struct SelectReport<'a> {
    #[serde(flatten)]
    trace: &'a SelectionTrace,
    table: String,
}

pub fn cmd_select(config: &Path, seed: Option<u64>, out: &Output) -> CliResult<()> {
    let mut run: SelectRun = config::load(config)?;
    if let Some(s) = seed {
        run.shift.seed = s;
    }
    let data = load_data(&run.data, &base_dir(config))?;
    let names: Vec<String> = match &run.candidates {
        Some(c) => c.clone(),
        None => data.covariates.iter().map(|(n, _)| n.clone()).collect(),
    };
    let candidates = names.iter().map(|n| Ok((n.clone(), data.get(n)?))).collect::<CliResult<Vec<_>>>()?;
    let trace = backward_select(&data.pattern, &candidates, &run.shift, run.alpha)?;
    let table = trace.table();
    log::info!("\n{table}");
    out.json(&SelectReport { trace: &trace, table })
}

#[derive(Serialize)]
struct SimulateSummary {
    model: String,
    seed: u64,
    n_points: usize,
    files: Vec<String>,
}

pub fn cmd_simulate(config: &Path, seed: Option<u64>, out_dir: &Path) -> CliResult<()> {
    let mut run: SimulateRun = config::load(config)?;
    if let Some(s) = seed {
        run.seed = s;
    }
    let mut spec = catalog::model(&run.model, run.params)?;
    if let Some(steps) = run.gibbs_steps {
        spec.gibbs.steps = steps;
    }
    let (geom, window) = unit_grid(run.grid)?;
    let sim = Simulator::new(spec, geom, window)?;
    let real = sim.simulate(&SeedStream::new(run.seed).child("model", 0))?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Data(format!("{}: {e}", out_dir.display())))?;

    let mut files = Vec::new();
    let create = |name: &str| {
        let p = out_dir.join(name);
        File::create(&p).map(std::io::BufWriter::new).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
    };
    write_points_csv(&real.pattern, create("points.csv")?)?;
    files.push("points.csv".to_string());
    let mut grids: Vec<(String, &ScalarField)> = real.covariates.iter().map(|(n, f)| (n.clone(), f)).collect();
    if run.write_latent {
        grids.extend(real.fields.iter().enumerate().map(|(k, f)| (format!("Z{}", k + 1), f)));
        grids.push(("intensity".into(), &real.intensity));
    }
    for (name, field) in grids {
        let file = format!("{name}.asc");
        write_ascii_grid(field, create(&file)?)?;
        files.push(file);
    }
    log::info!("{} points written to {}", real.pattern.len(), out_dir.display());
    Output { path: None }.json(&SimulateSummary {
        model: sim.spec().name.clone(),
        seed: run.seed,
        n_points: real.pattern.len(),
        files,
    })
}

pub fn cmd_replicate(config: &Path, seed: Option<u64>, out: &Output) -> CliResult<()> {
    let mut run = config::load_replicate(config)?;
    if let Some(s) = seed {
        run.seed = s;
    }
    let report = replicate(&run)?;
    log::info!("\n{}", report.csv());
    let csv = out.path.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    if csv {
        out.write(&report.csv())
    } else {
        out.json(&report)
    }
}
