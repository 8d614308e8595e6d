//! Backward covariate selection by repeated random-shift tests.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::PointPattern;
use crate::raster::ScalarField;
use crate::residual::ResidualKind;
use crate::rhohat::MAX_COVARIATES;
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use crate::shifttest::{backward_input_adapter, run_shift_test_cached, ShiftTestConfig};
use crate::smooth::SmootherCache;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStage {
    pub active: Vec<String>,
    /// p-value of each active covariate tested against the others, in the
    /// order of `active`.
    pub p_values: Vec<f64>,
    /// `None` when every p-value is below the level.
    pub removed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub stages: Vec<SelectionStage>,
    pub selected: Vec<String>,
    pub alpha: f64,
}

impl SelectionTrace {
    /// One row per covariate and one column per stage; the removed
    /// covariate's p-value is starred.
    pub fn table(&self) -> String {
        let names: Vec<&String> = self.stages.first().map(|s| s.active.iter().collect()).unwrap_or_default();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(9);
        let mut out = format!("{:width$}", "covariate");
        for i in 0..self.stages.len() {
            let _ = write!(out, "  {:>8}", format!("stage {}", i + 1));
        }
        out.push('\n');
        for name in names {
            let _ = write!(out, "{name:width$}");
            for stage in &self.stages {
                match stage.active.iter().position(|a| a == name) {
                    Some(i) => {
                        let star = if stage.removed.as_deref() == Some(name.as_str()) { "*" } else { " " };
                        let _ = write!(out, "  {:>7.3}{star}", stage.p_values[i]);
                    }
                    None => out.push_str("          "),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Tests each active covariate with the rest as nuisance, removes the one
/// with the largest p-value (ties to the earlier name) and repeats until
/// every p-value is below `alpha` or nothing is left.
pub fn backward_select<F: Scalar>(
    pattern: &PointPattern<F>,
    covariates: &[(String, &ScalarField<F>)],
    config: &ShiftTestConfig,
    alpha: f64,
) -> Result<SelectionTrace> {
    if covariates.is_empty() {
        return Err(Error::InvalidParameter("backward selection needs at least one covariate".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("significance level must lie in (0, 1), got {alpha}")));
    }
    if config.residuals == ResidualKind::Nonparametric && covariates.len() - 1 > MAX_COVARIATES {
        return Err(Error::TooManyCovariates { got: covariates.len() - 1, limit: MAX_COVARIATES });
    }
    for (i, (a, _)) in covariates.iter().enumerate() {
        if covariates[..i].iter().any(|(b, _)| a == b) {
            return Err(Error::InvalidParameter(format!("duplicate covariate name {a}")));
        }
    }
    config.validate(pattern.window())?;
    let geom = *covariates[0].1.geom();
    let cache = SmootherCache::new(geom, pattern.window().clone());
    let streams = SeedStream::new(config.seed);

    let mut active: Vec<usize> = (0..covariates.len()).collect();
    let mut stages = Vec::new();
    loop {
        let stage_seeds = streams.child("stage", stages.len() as u64);
        let p_values = active
            .par_iter()
            .map(|&i| {
                let nuisance: Vec<&ScalarField<F>> =
                    active.iter().filter(|&&j| j != i).map(|&j| covariates[j].1).collect();
                let mut cfg = config.clone();
                cfg.seed = stage_seeds.seed("covariate", i as u64);
                let r = run_shift_test_cached(pattern, &nuisance, covariates[i].1, &cfg, &cache)?;
                Ok(backward_input_adapter(&r))
            })
            .collect::<Result<Vec<f64>>>()?;
        let names: Vec<String> = active.iter().map(|&i| covariates[i].0.clone()).collect();
        if p_values.iter().all(|&p| p < alpha) {
            stages.push(SelectionStage { active: names.clone(), p_values, removed: None });
            return Ok(SelectionTrace { stages, selected: names, alpha });
        }
        let worst = (0..active.len())
            .max_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then_with(|| names[b].cmp(&names[a])))
            .expect("active is nonempty");
        let removed = names[worst].clone();
        stages.push(SelectionStage { active: names, p_values, removed: Some(removed) });
        active.remove(worst);
        if active.is_empty() {
            return Ok(SelectionTrace { stages, selected: Vec::new(), alpha });
        }
    }
}
