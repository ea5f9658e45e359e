use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{output_paths, run_trials, thread_count, trial_seed, write_csv, write_json, Budgets, GaussianSpec, LossSpec};
use crate::bounds::{evaluate_bound, BoundInputs};
use crate::geometry::{empirical_w1, GaussianMeasure};
use crate::loss::{gap_estimate, DataModel, LossModel};
use crate::{rng_stream, Error, Result};

/// Loss, data distribution, predictor dimension and sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub loss: LossSpec,
    pub data: DataModel,
    pub d: usize,
    pub m: usize,
}

/// The bound under test. Inputs left out are filled from the problem, the
/// loss constants, the prior/posterior pair and the per-trial W1 estimate.
/// The name `constant` is a control whose value is `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSpec {
    pub name: String,
    #[serde(default)]
    pub inputs: BoundInputs,
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub bound: BoundSpec,
    /// Data-free prior, `N(0, I)` by default.
    #[serde(default = "standard_spec")]
    pub prior: GaussianSpec,
    /// The fixed posterior evaluated in every trial.
    pub posterior: GaussianSpec,
    pub trials: usize,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn standard_spec() -> GaussianSpec {
    GaussianSpec { mean: None, variance: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub gap: f64,
    pub gap_se: f64,
    pub w1: f64,
    pub bound: f64,
    pub violated: bool,
    pub bound_valid: bool,
}

impl TrialRecord {
    pub(crate) const HEADER: [&'static str; 7] = ["trial", "seed", "gap", "gap_se", "w1", "bound", "violated"];

    pub(crate) fn csv_row(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.seed.to_string(),
            self.gap.to_string(),
            self.gap_se.to_string(),
            self.w1.to_string(),
            self.bound.to_string(),
            self.violated.to_string(),
        ]
    }
}

/// `violated` iff `|gap| - 3 gap_se > bound`.
pub(crate) fn is_violation(gap: f64, gap_se: f64, bound: f64) -> bool {
    gap.abs() - 3.0 * gap_se > bound
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub bound: String,
    pub violation_count: usize,
    pub trials: usize,
    pub violation_rate: f64,
    pub delta: f64,
    /// `sqrt(delta (1 - delta) / trials)`, the binomial standard error at the
    /// nominal rate.
    pub mc_std_error: f64,
    /// `delta + 3 mc_std_error`
    pub threshold: f64,
    pub within_threshold: bool,
    pub all_bounds_valid: bool,
    pub invalid_reasons: Vec<String>,
    pub records: Vec<TrialRecord>,
}

fn check_applicable(name: &str, loss: &LossModel) -> Result<()> {
    let fail = |reason: &str| {
        Err(Error::Inapplicable {
            bound: name.into(),
            reason: format!("loss `{}` {reason}", loss.name()),
        })
    };
    match name {
        "catoni" | "mcallester" | "gaussian_lipschitz" => {
            if !loss.bounded01() || loss.k().is_none() {
                return fail("is not [0,1]-valued and uniformly Lipschitz");
            }
        }
        "smooth" => {
            if !loss.bounded01() || !loss.is_smooth() {
                return fail("is not [0,1]-valued and smooth");
            }
        }
        "unbounded_lipschitz" => {
            if !loss.is_uniformly_lipschitz() {
                return fail("is not uniformly Lipschitz");
            }
        }
        "unbounded_smooth" => {
            if !loss.is_smooth() || loss.d_value().is_none() {
                return fail("is not smooth with a bounded value at 0");
            }
        }
        "constant" => {}
        "data_dep" | "sgd" => {
            return Err(Error::Inapplicable {
                bound: name.into(),
                reason: "needs the data-dependent Gibbs prior; use the end-to-end pipeline".into(),
            })
        }
        other => return Err(Error::invalid(format!("unknown bound `{other}`"))),
    }
    Ok(())
}

/// The configured inputs with every missing field filled.
fn filled_inputs(cfg: &ExperimentConfig, loss: &LossModel, p: &GaussianMeasure, q: &GaussianMeasure) -> BoundInputs {
    let mut inp = cfg.bound.inputs.clone();
    let smooth_family = matches!(cfg.bound.name.as_str(), "smooth" | "unbounded_smooth");
    inp.k = inp.k.or(loss.k());
    inp.l = inp.l.or(loss.l());
    inp.d_const = inp.d_const.or(if smooth_family { loss.d_grad() } else { loss.d_value() });
    inp.d_ell = inp.d_ell.or(loss.d_value());
    inp.m = inp.m.or(Some(cfg.problem.m));
    inp.d = inp.d.or(Some(cfg.problem.d));
    let (pa, pb) = p.eigen_extrema();
    let (qa, qb) = q.eigen_extrema();
    inp.alpha = inp.alpha.or(Some(pa.min(qa)));
    inp.beta = inp.beta.or(Some(pb.max(qb)));
    inp.big_m = inp.big_m.or(Some(p.mean().norm().max(q.mean().norm())));
    inp
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<LossModel> {
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.problem.m == 0 || self.problem.d == 0 {
            return Err(Error::invalid("problem needs m >= 1 and d >= 1"));
        }
        self.budgets.validate()?;
        self.problem.data.validate()?;
        let loss = self.problem.loss.build()?;
        loss.check_dims(self.problem.d, self.problem.data.z_dim())?;
        check_applicable(&self.bound.name, &loss)?;
        if self.bound.name == "constant" {
            match self.bound.value {
                Some(v) if v >= 0.0 => {}
                _ => return Err(Error::invalid("bound `constant` needs a nonnegative `value`")),
            }
        }
        match self.bound.inputs.delta {
            Some(d) if d > 0.0 && d < 1.0 => {}
            Some(d) => return Err(Error::invalid(format!("delta must lie in (0, 1), got {d}"))),
            None => return Err(Error::invalid("bound.inputs.delta is required")),
        }
        Ok(loss)
    }
}

/// Bound-violation frequency over independent samples `S ~ mu^m`.
pub fn validate_bound(cfg: &ExperimentConfig) -> Result<ValidationSummary> {
    let loss = cfg.validate()?;
    let d = cfg.problem.d;
    let p = cfg.prior.build(d)?;
    let q = cfg.posterior.build(d)?;
    let base_inputs = filled_inputs(cfg, &loss, &p, &q);
    let delta = base_inputs.delta.unwrap();
    let b = cfg.budgets;

    let results = run_trials(cfg.trials, thread_count(cfg.threads)?, |i| {
        let seed = trial_seed(cfg.seed, i);
        let mut rng = rng_stream(seed);
        let s = cfg.problem.data.sample_dataset(cfg.problem.m, &mut rng)?;
        let gap = gap_estimate(&loss, &q, &s, &cfg.problem.data, b.n_h, b.n_test, &mut rng)?;
        let w1 = empirical_w1(&q.sample(b.n_ot, &mut rng)?, &p.sample(b.n_ot, &mut rng)?)?;
        let (bound, valid, reasons) = match cfg.bound.name.as_str() {
            "constant" => (cfg.bound.value.unwrap(), true, vec![]),
            name => {
                let rep = evaluate_bound(name, &BoundInputs { w1: Some(w1), ..base_inputs.clone() })?;
                (rep.value, rep.valid, rep.reasons)
            }
        };
        let record = TrialRecord {
            trial: i,
            seed,
            gap: gap.value,
            gap_se: gap.std_error,
            w1,
            bound,
            violated: is_violation(gap.value, gap.std_error, bound),
            bound_valid: valid,
        };
        Ok((record, reasons))
    })?;

    let mut invalid_reasons: Vec<String> = vec![];
    let mut records = Vec::with_capacity(results.len());
    for (r, reasons) in results {
        for why in reasons {
            if !invalid_reasons.contains(&why) {
                invalid_reasons.push(why);
            }
        }
        records.push(r);
    }
    let violation_count = records.iter().filter(|r| r.violated).count();
    let trials = records.len();
    let mc_std_error = (delta * (1.0 - delta) / trials as f64).sqrt();
    let threshold = delta + 3.0 * mc_std_error;
    let violation_rate = violation_count as f64 / trials as f64;
    let summary = ValidationSummary {
        bound: cfg.bound.name.clone(),
        violation_count,
        trials,
        violation_rate,
        delta,
        mc_std_error,
        threshold,
        within_threshold: violation_rate <= threshold,
        all_bounds_valid: records.iter().all(|r| r.bound_valid),
        invalid_reasons,
        records,
    };
    if let Some(out) = &cfg.output {
        let (json, csv) = output_paths(out);
        write_json(&json, &summary)?;
        let rows: Vec<_> = summary.records.iter().map(TrialRecord::csv_row).collect();
        write_csv(&csv, &TrialRecord::HEADER, &rows)?;
    }
    Ok(summary)
}
