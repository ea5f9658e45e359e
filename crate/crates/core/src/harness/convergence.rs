use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{output_paths, run_trials, thread_count, trial_seed, write_csv, write_json, GaussianSpec};
use crate::bwsgd::{bwsgd_run, lambert_bound, BwSgdConfig};
use crate::geometry::w2_squared_gaussian;
use crate::gibbs::{gibbs_closed_form, GibbsPotential};
use crate::loss::{builtin_loss, DataModel, LossParams};
use crate::stats::mean_and_std_error;
use crate::{aux_stream, Error, Result};

/// BW-SGD on the quadratic potential `lambda R_S(h) + |h|^2 / (2 gamma)` with
/// `R_S` the `quadratic_plain` risk. Its Hessian is `(lambda + 1/gamma) I`,
/// so `alpha = lambda + 1/gamma` and the Gibbs measure is Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub d: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    /// `N(0.5, I)` data when absent.
    #[serde(default)]
    pub data: Option<DataModel>,
    pub lambda: f64,
    pub prior_variance: f64,
    /// `alpha^2 / 60` when absent.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(rename = "N", default = "default_n")]
    pub n_iter: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `N(mean_hat + 1/sqrt(d), 0.5/alpha I)`.
    #[serde(default)]
    pub init: Option<GaussianSpec>,
    /// Defaults to `2 max(|m_0|, |mean_hat|) + 1`.
    #[serde(rename = "bigM", default)]
    pub big_m: Option<f64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_m() -> usize {
    50
}
fn default_n() -> usize {
    500
}
fn default_seeds() -> usize {
    100
}

impl ConvergenceConfig {
    pub fn new(d: usize, lambda: f64, prior_variance: f64) -> Self {
        Self {
            d,
            m: default_m(),
            data: None,
            lambda,
            prior_variance,
            eta: None,
            n_iter: default_n(),
            seeds: default_seeds(),
            seed: 0,
            init: None,
            big_m: None,
            output: None,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub mean_w2sq: f64,
    pub std_error: f64,
    pub lambert_bound: f64,
    /// `mean + 2 se <= lambert_bound`
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub d: usize,
    pub alpha: f64,
    pub eta: f64,
    pub big_m: f64,
    pub w2sq_init: f64,
    /// `36 d eta / alpha^2`
    pub noise_floor: f64,
    pub rows: Vec<ConvergenceRow>,
    pub all_within: bool,
    /// Extremes over every iterate of every run.
    pub min_eig: f64,
    pub max_eig: f64,
    pub max_mean_norm: f64,
    /// Every covariance spectrum in `[alpha/9, 1/alpha]` and every mean
    /// within `bigM`, to `1e-10`.
    pub compact_ok: bool,
    /// Mean W2^2 over the last quarter of the run.
    pub plateau: f64,
}

pub fn sgd_convergence_experiment(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.seeds == 0 || cfg.d == 0 || cfg.m == 0 {
        return Err(Error::invalid("convergence needs seeds, d and m all >= 1"));
    }
    let d = cfg.d;
    let data = cfg
        .data
        .clone()
        .unwrap_or(DataModel::Gaussian { mean: vec![0.5; d], std: 1.0 });
    data.validate()?;
    let loss = builtin_loss("quadratic_plain", &LossParams::new())?;
    loss.check_dims(d, data.z_dim())?;
    let s = data.sample_dataset(cfg.m, &mut aux_stream(cfg.seed, 1))?;
    let prior = GaussianSpec { mean: None, variance: cfg.prior_variance }.build(d)?;
    let gp = GibbsPotential::new(loss, s, prior, cfg.lambda, false)?;
    let target = gibbs_closed_form(&gp)?;
    let alpha = cfg.lambda + 1.0 / cfg.prior_variance;
    if alpha > 1.0 + 1e-12 {
        return Err(Error::invalid(format!(
            "the Hessian (lambda + 1/gamma) I = {alpha} I must not exceed I"
        )));
    }
    let eta_max = alpha * alpha / 60.0;
    let eta = cfg.eta.unwrap_or(eta_max);
    if !(eta > 0.0 && eta <= eta_max * (1.0 + 1e-12)) {
        return Err(Error::invalid(format!("eta must lie in (0, alpha^2/60 = {eta_max}], got {eta}")));
    }
    let init = match &cfg.init {
        Some(spec) => spec.build(d)?,
        None => {
            let shift = nalgebra::DVector::from_element(d, 1.0 / (d as f64).sqrt());
            GaussianSpec::isotropic((target.mean() + shift).iter().copied().collect(), 0.5 / alpha).build(d)?
        }
    };
    let big_m = cfg
        .big_m
        .unwrap_or(2.0 * init.mean().norm().max(target.mean().norm()) + 1.0);
    let w2sq_init = w2_squared_gaussian(&init, &target)?;

    let runs = run_trials(cfg.seeds, thread_count(cfg.threads)?, |i| {
        let sgd = BwSgdConfig::new(eta, cfg.n_iter, alpha, big_m, init.clone(), trial_seed(cfg.seed, i));
        bwsgd_run(&gp, &sgd, Some(&target))
    })?;

    let mut rows = Vec::with_capacity(cfg.n_iter + 1);
    for k in 0..=cfg.n_iter {
        let vals: Vec<f64> = runs.iter().map(|t| t.points[k].w2sq_to_reference.unwrap()).collect();
        let (mean, se) = mean_and_std_error(&vals);
        let bound = lambert_bound(alpha, eta, w2sq_init, k, d);
        rows.push(ConvergenceRow {
            k,
            mean_w2sq: mean,
            std_error: se,
            lambert_bound: bound,
            within: mean + 2.0 * se <= bound * (1.0 + 1e-12),
        });
    }
    let min_eig = runs.iter().map(|t| t.min_eig).fold(f64::INFINITY, f64::min);
    let max_eig = runs.iter().map(|t| t.max_eig).fold(f64::NEG_INFINITY, f64::max);
    let max_mean_norm = runs.iter().map(|t| t.max_mean_norm).fold(0.0, f64::max);
    let tail = &rows[(3 * cfg.n_iter / 4)..];
    let plateau = tail.iter().map(|r| r.mean_w2sq).sum::<f64>() / tail.len() as f64;
    let report = ConvergenceReport {
        d,
        alpha,
        eta,
        big_m,
        w2sq_init,
        noise_floor: 36.0 * d as f64 * eta / (alpha * alpha),
        all_within: rows.iter().all(|r| r.within),
        rows,
        min_eig,
        max_eig,
        max_mean_norm,
        compact_ok: min_eig >= alpha / 9.0 - 1e-10 && max_eig <= 1.0 / alpha + 1e-10 && max_mean_norm <= big_m + 1e-10,
        plateau,
    };
    if let Some(out) = &cfg.output {
        let (json, csv) = output_paths(out);
        write_json(&json, &report)?;
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.k.to_string(),
                    r.mean_w2sq.to_string(),
                    r.std_error.to_string(),
                    r.lambert_bound.to_string(),
                    r.within.to_string(),
                ]
            })
            .collect();
        write_csv(&csv, &["k", "mean_w2sq", "std_error", "lambert_bound", "within"], &rows)?;
    }
    Ok(report)
}
