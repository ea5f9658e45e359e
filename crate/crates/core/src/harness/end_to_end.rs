use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::validate::{is_violation, TrialRecord};
use super::{output_paths, run_trials, thread_count, trial_seed, write_csv, write_json, Budgets, GaussianSpec, LossSpec};
use crate::bounds::{sgd_bound, BoundInputs, Regime, SgdInputs};
use crate::bwsgd::{bwsgd_run, schedule_for_accuracy, vi_reference, BwSgdConfig, ViReferenceConfig};
use crate::geometry::{empirical_w1, rad_radius, w2_squared_gaussian, CompactClass};
use crate::gibbs::{f_r_from_cloud, ula_sample, GibbsPotential, UlaConfig};
use crate::loss::{gap_estimate, DataModel};
use crate::{aux_stream, Error, Result};

/// Chain settings for sampling the Gibbs measure; the chain starts at the
/// variational mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UlaSettings {
    pub step: f64,
    pub burn_in: usize,
    pub thinning: usize,
}

impl Default for UlaSettings {
    fn default() -> Self {
        Self { step: 0.01, burn_in: 2000, thinning: 20 }
    }
}

/// Per trial: draw `S`, build the Gibbs potential `(lambda/2K) R_S - log P`,
/// compute its Gaussian variational minimiser, schedule and run BW-SGD, sample
/// the Gibbs measure for `W1(Q_hat, Q*)` and `f_R`, evaluate the SGD bound
/// and compare it with the measured gap of the last iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndToEndConfig {
    pub loss: LossSpec,
    pub data: DataModel,
    pub d: usize,
    pub m: usize,
    pub lambda: f64,
    #[serde(default = "standard_spec")]
    pub prior: GaussianSpec,
    pub init: GaussianSpec,
    pub delta: f64,
    #[serde(rename = "bigM")]
    pub big_m: f64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit")]
    pub c_sched: f64,
    /// Runs `ceil(multiplier * N)` steps instead of the scheduled `N`.
    #[serde(default = "unit")]
    pub n_iter_multiplier: f64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub ula: UlaSettings,
    #[serde(default)]
    pub vi: ViReferenceConfig,
    /// Overrides for the bound (e.g. `c_dp`, `beta_m`).
    #[serde(default)]
    pub bound_inputs: BoundInputs,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn standard_spec() -> GaussianSpec {
    GaussianSpec { mean: None, variance: 1.0 }
}
fn default_trials() -> usize {
    100
}
fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndTrial {
    #[serde(flatten)]
    pub record: TrialRecord,
    pub eta: f64,
    #[serde(rename = "N")]
    pub n_iter: usize,
    pub w2sq_init: f64,
    pub w2sq_final: f64,
    pub f_times_w2: f64,
    pub markov_factor: f64,
    pub f_r: f64,
    pub regime: Regime,
    pub reasons: Vec<String>,
    pub compact_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndReport {
    pub alpha: f64,
    pub hessian_upper: f64,
    pub delta: f64,
    pub confidence: f64,
    pub violation_count: usize,
    pub trials: usize,
    pub violation_rate: f64,
    /// `sqrt(2 delta (1 - 2 delta) / trials)`
    pub mc_std_error: f64,
    /// `2 delta + 3 mc_std_error`
    pub threshold: f64,
    pub within_threshold: bool,
    pub max_f_times_w2: f64,
    pub all_bounds_valid: bool,
    pub warnings: Vec<String>,
    pub trials_detail: Vec<EndToEndTrial>,
}

impl EndToEndConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.d == 0 || self.m == 0 {
            return Err(Error::invalid("trials, d and m must all be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::invalid(format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        if !(self.n_iter_multiplier.is_finite() && self.n_iter_multiplier > 0.0) {
            return Err(Error::invalid("n_iter_multiplier must be positive"));
        }
        self.budgets.validate()?;
        self.data.validate()?;
        self.loss.build()?.check_dims(self.d, self.data.z_dim())
    }
}

pub fn end_to_end_sgd_generalisation(cfg: &EndToEndConfig) -> Result<EndToEndReport> {
    cfg.validate()?;
    let loss = cfg.loss.build()?;
    let d = cfg.d;
    let prior = cfg.prior.build(d)?;
    let init = cfg.init.build(d)?;
    let k = loss.k().ok_or_else(|| Error::Inapplicable {
        bound: "sgd".into(),
        reason: format!("loss `{}` is not uniformly Lipschitz", loss.name()),
    })?;
    let d_const = loss.d_value().ok_or_else(|| Error::Inapplicable {
        bound: "sgd".into(),
        reason: format!("loss `{}` is not uniformly Lipschitz with a bounded value at 0", loss.name()),
    })?;
    let (_, prior_eig_max) = prior.eigen_extrema();

    // the sandwich is a certificate from the constants, independent of S
    let probe = cfg.data.sample_dataset(1, &mut aux_stream(cfg.seed, 2))?;
    let hb = GibbsPotential::new(loss.clone(), probe, prior.clone(), cfg.lambda, true)?.hessian_bounds()?;
    if !(hb.lower > 0.0) {
        return Err(Error::Inapplicable {
            bound: "sgd".into(),
            reason: format!("potential is not strongly convex (lower bound {})", hb.lower),
        });
    }
    if hb.upper > 1.0 + 1e-12 {
        return Err(Error::Inapplicable {
            bound: "sgd".into(),
            reason: format!("Hessian upper bound {} exceeds 1", hb.upper),
        });
    }
    let alpha = hb.lower;
    let mut warnings = hb.issues.clone();
    let class = CompactClass::new(alpha / 9.0, 1.0 / alpha, cfg.big_m)?;
    let r = rad_radius(&class, cfg.m, d)?;
    let b = cfg.budgets;

    let results = run_trials(cfg.trials, thread_count(cfg.threads)?, |i| {
        let seed = trial_seed(cfg.seed, i);
        let mut rng = aux_stream(seed, 1);
        let s = cfg.data.sample_dataset(cfg.m, &mut rng)?;
        let gp = GibbsPotential::new(loss.clone(), s.clone(), prior.clone(), cfg.lambda, true)?;
        let q_hat = vi_reference(&gp, &init, &cfg.vi)?;
        let w2sq_init = w2_squared_gaussian(&init, &q_hat)?;
        let sched = schedule_for_accuracy(alpha, d, cfg.delta, w2sq_init.sqrt(), cfg.c_sched)?;
        let n_iter = (sched.n_iter as f64 * cfg.n_iter_multiplier).ceil() as usize;
        let mut sgd = BwSgdConfig::new(sched.eta, n_iter, alpha, cfg.big_m, init.clone(), seed);
        sgd.record_every = (n_iter / 100).max(1);
        let traj = bwsgd_run(&gp, &sgd, None)?;
        let q_n = traj.last();
        let w2sq_final = w2_squared_gaussian(q_n, &q_hat)?;
        let compact_ok = traj.min_eig >= alpha / 9.0 - 1e-10
            && traj.max_eig <= 1.0 / alpha + 1e-10
            && traj.max_mean_norm <= cfg.big_m + 1e-10;

        let mut ula = UlaConfig::new(b.n_ot, cfg.ula.step, cfg.ula.burn_in, cfg.ula.thinning);
        ula.init = Some(q_hat.mean().iter().copied().collect());
        let gibbs = ula_sample(&gp, &ula, &mut rng)?;
        let w1_hat_star = empirical_w1(&q_hat.sample(b.n_ot, &mut rng)?, &gibbs)?;
        let f_r = f_r_from_cloud(&gibbs, r)?;

        let o = &cfg.bound_inputs;
        let inputs = BoundInputs {
            k: o.k.or(Some(k)),
            d_const: o.d_const.or(Some(d_const)),
            m: Some(cfg.m),
            d: Some(d),
            delta: Some(cfg.delta),
            big_m: Some(cfg.big_m),
            f_r: o.f_r.or(Some(f_r)),
            lambda: Some(cfg.lambda),
            prior_strong_convexity: o.prior_strong_convexity.or(Some(1.0 / prior_eig_max)),
            sgd: Some(SgdInputs {
                eta: sched.eta,
                n_iter,
                alpha,
                w2sq_init,
                w1_hat_to_star: w1_hat_star,
            }),
            ..o.clone()
        };
        let rep = sgd_bound(&inputs)?;
        let gap = gap_estimate(&loss, q_n, &s, &cfg.data, b.n_h, b.n_test, &mut rng)?;
        Ok(EndToEndTrial {
            record: TrialRecord {
                trial: i,
                seed,
                gap: gap.value,
                gap_se: gap.std_error,
                w1: w1_hat_star,
                bound: rep.value,
                violated: is_violation(gap.value, gap.std_error, rep.value),
                bound_valid: rep.valid,
            },
            eta: sched.eta,
            n_iter,
            w2sq_init,
            w2sq_final,
            f_times_w2: rep.component("param:f_times_w2").unwrap(),
            markov_factor: rep.component("param:markov_factor").unwrap(),
            f_r,
            regime: rep.regime,
            reasons: rep.reasons,
            compact_ok,
        })
    })?;

    for t in &results {
        if t.regime != Regime::Asymptotic {
            let w = format!("regime is {}, the bound is stated for the asymptotic regime", t.regime);
            if !warnings.contains(&w) {
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    let trials = results.len();
    let violation_count = results.iter().filter(|t| t.record.violated).count();
    let violation_rate = violation_count as f64 / trials as f64;
    let nominal = 2.0 * cfg.delta;
    let mc_std_error = (nominal * (1.0 - nominal) / trials as f64).sqrt();
    let threshold = nominal + 3.0 * mc_std_error;
    let report = EndToEndReport {
        alpha,
        hessian_upper: hb.upper,
        delta: cfg.delta,
        confidence: 1.0 - nominal,
        violation_count,
        trials,
        violation_rate,
        mc_std_error,
        threshold,
        within_threshold: violation_rate <= threshold,
        max_f_times_w2: results.iter().map(|t| t.f_times_w2).fold(0.0, f64::max),
        all_bounds_valid: results.iter().all(|t| t.record.bound_valid),
        warnings,
        trials_detail: results,
    };
    if let Some(out) = &cfg.output {
        let (json, csv) = output_paths(out);
        write_json(&json, &report)?;
        let mut header: Vec<&str> = TrialRecord::HEADER.to_vec();
        header.extend(["eta", "N", "w2sq_init", "w2sq_final", "f_times_w2", "markov_factor", "f_R", "bound_valid"]);
        let rows: Vec<Vec<String>> = report
            .trials_detail
            .iter()
            .map(|t| {
                let mut row = t.record.csv_row();
                row.extend([
                    t.eta.to_string(),
                    t.n_iter.to_string(),
                    t.w2sq_init.to_string(),
                    t.w2sq_final.to_string(),
                    t.f_times_w2.to_string(),
                    t.markov_factor.to_string(),
                    t.f_r.to_string(),
                    t.record.bound_valid.to_string(),
                ]);
                row
            })
            .collect();
        write_csv(&csv, &header, &rows)?;
    }
    Ok(report)
}
