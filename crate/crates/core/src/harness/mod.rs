//! Reproducible Monte Carlo campaigns.
//!
//! Trial `i` of a campaign with base seed `s` uses seed `s + i` and nothing
//! else, so serial and parallel runs give identical records. Worker count
//! comes from the config, then from `WPB_THREADS`, then from rayon's default.

mod convergence;
mod end_to_end;
mod validate;

pub use convergence::{sgd_convergence_experiment, ConvergenceConfig, ConvergenceReport, ConvergenceRow};
pub use end_to_end::{end_to_end_sgd_generalisation, EndToEndConfig, EndToEndReport, EndToEndTrial, UlaSettings};
pub use validate::{validate_bound, BoundSpec, ExperimentConfig, Problem, TrialRecord, ValidationSummary};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::GaussianMeasure;
use crate::loss::{builtin_loss, LossModel, LossParams};
use crate::{Error, Result};

/// A builtin loss by name with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub name: String,
    #[serde(default)]
    pub params: LossParams,
}

impl LossSpec {
    pub fn build(&self) -> Result<LossModel> {
        builtin_loss(&self.name, &self.params)
    }
}

/// An isotropic Gaussian `N(mean, variance I)`; a missing mean is the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSpec {
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub variance: f64,
}

fn one() -> f64 {
    1.0
}

impl GaussianSpec {
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        Self { mean: Some(mean), variance }
    }

    pub fn build(&self, d: usize) -> Result<GaussianMeasure> {
        let mean = match &self.mean {
            None => DVector::zeros(d),
            Some(v) if v.len() == d => DVector::from_column_slice(v),
            Some(v) => return Err(Error::DimensionMismatch { expected: d, found: v.len() }),
        };
        GaussianMeasure::isotropic(mean, self.variance)
    }
}

/// Monte Carlo budgets: predictors per gap estimate, fresh test points per
/// predictor, and samples per side for empirical transport.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub n_h: usize,
    pub n_test: usize,
    pub n_ot: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { n_h: 100, n_test: 200, n_ot: 1024 }
    }
}

impl Budgets {
    pub fn validate(&self) -> Result<()> {
        if self.n_h == 0 || self.n_test == 0 || self.n_ot == 0 {
            return Err(Error::invalid(format!("budgets must all be >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// Reads a JSON config. Unknown fields are rejected by the config types.
pub fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))
}

/// Worker count: explicit value, else `WPB_THREADS`, else `None` (rayon default).
pub fn thread_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = explicit {
        if n == 0 {
            return Err(Error::invalid("threads must be >= 1"));
        }
        return Ok(Some(n));
    }
    match std::env::var("WPB_THREADS") {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::invalid(format!("WPB_THREADS must be a positive integer, got `{s}`"))),
        },
    }
}

/// Runs `f(0..trials)` on a pool of `threads` workers and returns the
/// results in trial order. The first error, by trial index, wins.
pub fn run_trials<T, F>(trials: usize, threads: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<T>> = pool.install(|| (0..trials).into_par_iter().map(&f).collect());
    results.into_iter().collect()
}

/// Seed of trial `i`.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

/// Writes `value` as pretty JSON to `path`, creating parent directories.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Writes rows under `header` as CSV.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    create_parent(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    Ok(())
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// `<out>.json` and `<out>.csv` for an output stem (an existing extension is
/// replaced).
pub fn output_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("csv"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trials_come_back_in_order_for_any_pool() {
        let f = |i: usize| Ok(i * i);
        let a = run_trials(50, Some(1), f).unwrap();
        let b = run_trials(50, Some(4), f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[7], 49);
    }

    #[test]
    fn first_error_by_index() {
        let r = run_trials(10, Some(3), |i| if i >= 4 { Err(Error::invalid(format!("t{i}"))) } else { Ok(i) });
        assert!(r.unwrap_err().to_string().contains("t4"));
    }

    #[test]
    fn gaussian_spec_defaults() {
        let g: GaussianSpec = serde_json::from_str("{}").unwrap();
        let q = g.build(3).unwrap();
        assert_eq!(q.mean(), &DVector::zeros(3));
        assert!(GaussianSpec::isotropic(vec![1.0], 1.0).build(2).is_err());
        assert!(serde_json::from_str::<GaussianSpec>(r#"{"var": 1}"#).is_err());
    }

    #[test]
    fn explicit_threads_win_and_zero_is_rejected() {
        assert_eq!(thread_count(Some(2)).unwrap(), Some(2));
        assert!(thread_count(Some(0)).is_err());
    }

    #[test]
    fn output_stems() {
        let (j, c) = output_paths(Path::new("out/run.json"));
        assert_eq!(j, PathBuf::from("out/run.json"));
        assert_eq!(c, PathBuf::from("out/run.csv"));
    }
}
