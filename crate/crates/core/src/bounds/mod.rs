//! Evaluators for the explicit generalisation bounds.
//!
//! Each bound returns a [`BoundReport`] whose `components` map rebuilds the
//! value: keys without a prefix are added directly, keys `sqrt:<name>` (or
//! `sqrt2:<name>`, ...) are summed per prefix and enter through one square
//! root per prefix, and keys `param:<name>` are informative only.

mod compact;
mod data_dep;
mod gaussian;

pub use compact::{catoni_bound, covering_number_bound, lambda_max, mcallester_bound};
pub use data_dep::{data_dep_bound, dp_lambda_threshold, sgd_bound, BetaMRate, SgdInputs};
pub use gaussian::{
    classify_regime, gaussian_lipschitz_bound, smooth_bound, unbounded_lipschitz_bound,
    unbounded_smooth_bound,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{rad_radius, CompactClass};
use crate::{Error, Result};

/// Every named bound, in the order the CLI lists them.
pub const BOUND_NAMES: [&str; 8] = [
    "catoni",
    "mcallester",
    "gaussian_lipschitz",
    "unbounded_lipschitz",
    "smooth",
    "unbounded_smooth",
    "data_dep",
    "sgd",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "low-data")]
    LowData,
    #[serde(rename = "transitory")]
    Transitory,
    #[serde(rename = "asymptotic")]
    Asymptotic,
    #[serde(rename = "n/a")]
    NotApplicable,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::LowData => "low-data",
            Regime::Transitory => "transitory",
            Regime::Asymptotic => "asymptotic",
            Regime::NotApplicable => "n/a",
        })
    }
}

/// Inputs shared by all bounds. Each bound reads the fields it needs and
/// reports an error naming any that are missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInputs {
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d_const: Option<f64>,
    #[serde(rename = "D_ell", default, skip_serializing_if = "Option::is_none")]
    pub d_ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "bigM", default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(rename = "f_R", default, skip_serializing_if = "Option::is_none")]
    pub f_r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_m_rate: Option<BetaMRate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_dp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_strong_convexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sgd: Option<SgdInputs>,
}

pub(crate) struct Ctx<'a> {
    pub bound: &'a str,
}

impl Ctx<'_> {
    fn missing(&self, field: &str) -> Error {
        Error::invalid(format!("bound `{}` requires `{field}`", self.bound))
    }

    pub fn nonneg(&self, v: Option<f64>, field: &str) -> Result<f64> {
        let v = v.ok_or_else(|| self.missing(field))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!(
                "bound `{}`: `{field}` must be finite and >= 0, got {v}",
                self.bound
            )));
        }
        Ok(v)
    }

    pub fn positive(&self, v: Option<f64>, field: &str) -> Result<f64> {
        let x = self.nonneg(v, field)?;
        if x == 0.0 {
            return Err(Error::invalid(format!(
                "bound `{}`: `{field}` must be > 0",
                self.bound
            )));
        }
        Ok(x)
    }

    pub fn count(&self, v: Option<usize>, field: &str) -> Result<usize> {
        let n = v.ok_or_else(|| self.missing(field))?;
        if n == 0 {
            return Err(Error::invalid(format!(
                "bound `{}`: `{field}` must be >= 1",
                self.bound
            )));
        }
        Ok(n)
    }

    pub fn delta(&self, v: Option<f64>) -> Result<f64> {
        let v = v.ok_or_else(|| self.missing("delta"))?;
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!(
                "bound `{}`: delta must lie in (0, 1), got {v}",
                self.bound
            )));
        }
        Ok(v)
    }

    pub fn compact(&self, inp: &BoundInputs) -> Result<CompactClass> {
        let a = inp.alpha.ok_or_else(|| self.missing("alpha"))?;
        let b = inp.beta.ok_or_else(|| self.missing("beta"))?;
        let m = inp.big_m.ok_or_else(|| self.missing("bigM"))?;
        CompactClass::new(a, b, m)
    }

    /// `R` from the inputs, or the smallest radius satisfying the `Rad`
    /// conditions. A supplied radius below that value is flagged.
    pub fn radius(
        &self,
        inp: &BoundInputs,
        class: &CompactClass,
        m: usize,
        d: usize,
        report: &mut BoundReport,
    ) -> Result<f64> {
        if d < 3 {
            return Err(Error::Inapplicable {
                bound: self.bound.into(),
                reason: format!("needs d >= 3, got d = {d}"),
            });
        }
        let rad = rad_radius(class, m, d)?;
        let r = match inp.r {
            None => rad,
            Some(_) => {
                let r = self.positive(inp.r, "R")?;
                if r < rad * (1.0 - 1e-12) {
                    report.flag(format!("R = {r} is below the Rad radius {rad}"));
                }
                r
            }
        };
        report.set("param:R", r);
        Ok(r)
    }
}

/// A bound value with its additive pieces and validity flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub value: f64,
    pub components: BTreeMap<String, f64>,
    pub regime: Regime,
    pub valid: bool,
    pub reasons: Vec<String>,
}

impl BoundReport {
    pub(crate) fn new(regime: Regime) -> Self {
        Self {
            value: f64::NAN,
            components: BTreeMap::new(),
            regime,
            valid: true,
            reasons: vec![],
        }
    }

    pub(crate) fn set(&mut self, key: &str, v: f64) {
        self.components.insert(key.to_string(), v);
    }

    pub(crate) fn flag(&mut self, reason: String) {
        self.valid = false;
        self.reasons.push(reason);
    }

    pub(crate) fn finish(mut self) -> Self {
        self.value = self.reconstruct();
        self
    }

    /// The value rebuilt from `components` by the prefix convention.
    pub fn reconstruct(&self) -> f64 {
        let mut plain = 0.0;
        let mut roots: BTreeMap<&str, f64> = BTreeMap::new();
        for (k, v) in &self.components {
            match k.split_once(':') {
                Some(("param", _)) => {}
                Some((group, _)) if group.starts_with("sqrt") => {
                    *roots.entry(group).or_insert(0.0) += v;
                }
                _ => plain += v,
            }
        }
        plain + roots.values().map(|s| s.sqrt()).sum::<f64>()
    }

    pub fn component(&self, key: &str) -> Option<f64> {
        self.components.get(key).copied()
    }
}

/// Evaluates the bound called `name` (one of [`BOUND_NAMES`]).
pub fn evaluate_bound(name: &str, inp: &BoundInputs) -> Result<BoundReport> {
    match name {
        "catoni" => catoni_bound(inp),
        "mcallester" => mcallester_bound(inp),
        "gaussian_lipschitz" => gaussian_lipschitz_bound(inp),
        "unbounded_lipschitz" => unbounded_lipschitz_bound(inp),
        "smooth" => smooth_bound(inp),
        "unbounded_smooth" => unbounded_smooth_bound(inp),
        "data_dep" => data_dep_bound(inp),
        "sgd" => sgd_bound(inp),
        other => Err(Error::invalid(format!(
            "unknown bound `{other}`; expected one of {}",
            BOUND_NAMES.join(", ")
        ))),
    }
}

/// `4/log(3/delta) (2 + sqrt((log(3/delta) + 2d log(1 + 2Rm)) / 2m))`.
pub(crate) fn epsilon_m(m: usize, d: usize, r: f64, delta: f64) -> f64 {
    let mf = m as f64;
    let l3 = (3.0 / delta).ln();
    4.0 / l3 * (2.0 + ((l3 + 2.0 * d as f64 * (2.0 * r * mf).ln_1p()) / (2.0 * mf)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstruct_follows_prefixes() {
        let mut r = BoundReport::new(Regime::NotApplicable);
        r.set("residual", 0.5);
        r.set("sqrt:a", 3.0);
        r.set("sqrt:b", 1.0);
        r.set("sqrt2:c", 9.0);
        r.set("param:ignored", 100.0);
        let r = r.finish();
        assert_eq!(r.value, 0.5 + 2.0 + 3.0);
    }

    #[test]
    fn json_shape() {
        let mut r = BoundReport::new(Regime::Asymptotic);
        r.set("x", 1.0);
        r.flag("because".into());
        let v = serde_json::to_value(r.finish()).unwrap();
        assert_eq!(v["regime"], "asymptotic");
        assert_eq!(v["valid"], false);
        assert_eq!(v["reasons"][0], "because");
        assert_eq!(v["components"]["x"], 1.0);
        assert_eq!(v["value"], 1.0);
    }

    #[test]
    fn inputs_use_symbol_names_and_reject_typos() {
        let inp: BoundInputs = serde_json::from_str(
            r#"{"K":1,"m":10,"d":3,"delta":0.1,"bigM":2,"f_R":0.1,"D_ell":1}"#,
        )
        .unwrap();
        assert_eq!((inp.k, inp.m, inp.big_m, inp.f_r, inp.d_ell), (Some(1.0), Some(10), Some(2.0), Some(0.1), Some(1.0)));
        assert!(serde_json::from_str::<BoundInputs>(r#"{"k":1}"#).is_err());
    }

    #[test]
    fn unknown_bound_name() {
        assert!(evaluate_bound("nope", &BoundInputs::default()).is_err());
    }

    #[test]
    fn missing_fields_are_named() {
        let e = evaluate_bound("mcallester", &BoundInputs::default()).unwrap_err();
        assert!(e.to_string().contains("requires"), "{e}");
    }
}
