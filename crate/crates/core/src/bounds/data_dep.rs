//! Bounds with the data-dependent Gibbs prior `P_{-(lambda/2K) R_S}`, made
//! admissible through differential privacy, and their instantiation for the
//! output of Bures-Wasserstein SGD.

use serde::{Deserialize, Serialize};

use super::gaussian::classify_regime;
use super::{epsilon_m, BoundInputs, BoundReport, Ctx, Regime};
use crate::geometry::{truncated_moment_bounds, CompactClass};
use crate::{Error, Result};

/// `(1/2K) sqrt(alpha log m / (m (1 - 2 log log m + 10 log m)))`: the largest
/// inverse temperature for which the Gibbs kernel is differentially private.
pub fn dp_lambda_threshold(k: f64, alpha_strong: f64, m: usize) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid(format!("K must be > 0, got {k}")));
    }
    if !(alpha_strong > 0.0 && alpha_strong.is_finite()) {
        return Err(Error::invalid(format!("strong convexity must be > 0, got {alpha_strong}")));
    }
    if m < 3 {
        return Err(Error::invalid(format!("the privacy threshold needs m >= 3, got {m}")));
    }
    let lm = (m as f64).ln();
    let denom = 1.0 - 2.0 * lm.ln() + 10.0 * lm;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!("nonpositive denominator {denom} at m={m}")));
    }
    Ok((alpha_strong * lm / (m as f64 * denom)).sqrt() / (2.0 * k))
}

/// Default rate of the privacy slack `beta_m` when it is not given directly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMRate {
    /// `1 / sqrt(m)`
    #[default]
    InvSqrt,
    /// `1 / m`
    Inv,
}

impl BetaMRate {
    pub fn value(self, m: usize) -> f64 {
        match self {
            BetaMRate::InvSqrt => 1.0 / (m as f64).sqrt(),
            BetaMRate::Inv => 1.0 / m as f64,
        }
    }
}

/// Optimisation quantities of an SGD run feeding [`sgd_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdInputs {
    pub eta: f64,
    #[serde(rename = "N")]
    pub n_iter: usize,
    /// strong convexity of the potential
    pub alpha: f64,
    /// `W2^2` between the initial iterate and the variational minimiser
    pub w2sq_init: f64,
    /// `W1` between the variational minimiser and the Gibbs measure
    pub w1_hat_to_star: f64,
}

/// Bound with the Gibbs prior, the `O(log m)` max-information term taken as
/// `c_dp log m`. `w1` is the distance from `Q` to the Gibbs prior and `f_R`
/// the mass the projection moves for that prior.
pub fn data_dep_bound(inp: &BoundInputs) -> Result<BoundReport> {
    let c = Ctx { bound: "data_dep" };
    let class = c.compact(inp)?;
    let w1 = c.nonneg(inp.w1, "w1")?;
    skeleton(&c, inp, &class, w1, BoundReport::new(Regime::NotApplicable))
}

fn skeleton(
    c: &Ctx,
    inp: &BoundInputs,
    class: &CompactClass,
    w1: f64,
    mut rep: BoundReport,
) -> Result<BoundReport> {
    let k = c.positive(inp.k, "K")?;
    let d_const = c.nonneg(inp.d_const, "D")?;
    let m = c.count(inp.m, "m")?;
    let d = c.count(inp.d, "d")?;
    let delta = c.delta(inp.delta)?;
    let f_r = c.nonneg(inp.f_r, "f_R")?;
    let lambda = c.nonneg(inp.lambda, "lambda")?;
    let c_dp = match inp.c_dp {
        None => 1.0,
        v => c.nonneg(v, "c_dp")?,
    };
    let beta_m = match inp.beta_m {
        None => inp.beta_m_rate.unwrap_or_default().value(m),
        v => c.nonneg(v, "beta_m")?,
    };
    if m < 3 {
        return Err(Error::Inapplicable {
            bound: c.bound.into(),
            reason: format!("needs m >= 3, got m = {m}"),
        });
    }
    rep.regime = classify_regime(d, m);
    let r = c.radius(inp, class, m, d, &mut rep)?;
    rep.set("param:beta_m", beta_m);
    rep.set("param:c_dp", c_dp);

    let strong = match inp.prior_strong_convexity {
        None => 1.0 / class.beta(),
        v => c.positive(v, "prior_strong_convexity")?,
    };
    let lambda_m = dp_lambda_threshold(k, strong, m)?;
    let lambda_prime = lambda / (2.0 * k * m as f64);
    rep.set("param:lambda_m", lambda_m);
    rep.set("param:lambda_prime", lambda_prime);
    if lambda_prime > lambda_m {
        rep.flag(format!("lambda' = {lambda_prime} exceeds the privacy threshold {lambda_m}"));
    }
    if lambda > (m as f64).sqrt() {
        rep.flag(format!("lambda = {lambda} exceeds sqrt(m)"));
    }
    if delta <= beta_m {
        rep.flag(format!("delta = {delta} does not exceed beta_m = {beta_m}"));
        rep.value = f64::INFINITY;
        return Ok(rep);
    }

    let mf = m as f64;
    let (t2, _) = truncated_moment_bounds(class, m);
    let d_r = d_const + k * r;
    let c_r = 2.0 * k * (2.0 * k + d_r);
    let slack = delta - beta_m;
    let delta_prime = slack * mf.powf(-c_dp);
    let alpha_m = 2.0 * t2 + epsilon_m(m, d, r, delta_prime);
    rep.set("param:D_R", d_r);
    rep.set("param:C_R", c_r);
    rep.set("param:delta_prime", delta_prime);
    rep.set("param:alpha_m", alpha_m);

    rep.set("residual", 2.0 * k * t2);
    let log_term = ((1.0 / slack).ln() + c_dp * mf.ln() + 2.0 * d as f64 * (2.0 * r * mf).ln_1p()) / mf;
    rep.set("sqrt:complexity", c_r * log_term * (w1 + alpha_m + f_r));
    rep.set("sqrt2:statistical", d_r * d_r * ((mf / slack).ln() + c_dp * mf.ln()) / mf);
    Ok(rep.finish())
}

/// [`data_dep_bound`] for the SGD output `Q_N` against the Gibbs prior, with
/// the Wasserstein slot `f(N,eta) sqrt(W2^2(Q_0, Q_hat)) + 1 + eps`, where
/// `f = sqrt(exp(-alpha N eta) W2^2(Q_0, Q_hat) / delta)` and
/// `eps = sqrt(36 d eta / (alpha^2 delta)) + W1(Q_hat, Q*)`. The class is
/// the one SGD iterates stay in, `(alpha/9, 1/alpha, M)`. Holds with
/// probability `1 - 2 delta`.
pub fn sgd_bound(inp: &BoundInputs) -> Result<BoundReport> {
    let c = Ctx { bound: "sgd" };
    let s = inp.sgd.ok_or_else(|| Error::invalid("bound `sgd` requires `sgd`"))?;
    let eta = c.positive(Some(s.eta), "sgd.eta")?;
    let alpha = c.positive(Some(s.alpha), "sgd.alpha")?;
    let w2sq = c.nonneg(Some(s.w2sq_init), "sgd.w2sq_init")?;
    let w1_hs = c.nonneg(Some(s.w1_hat_to_star), "sgd.w1_hat_to_star")?;
    let delta = c.delta(inp.delta)?;
    let d = c.count(inp.d, "d")?;
    let big_m = c.nonneg(inp.big_m, "bigM")?;
    let class = CompactClass::new(alpha / 9.0, 1.0 / alpha, big_m)?;

    let decay = (-alpha * s.n_iter as f64 * eta).exp();
    let f = (decay * w2sq / delta).sqrt();
    let noise = 36.0 * d as f64 * eta / (alpha * alpha);
    let eps = (noise / delta).sqrt() + w1_hs;
    let w1_term = f * w2sq.sqrt() + 1.0 + eps;
    let markov = (2.0 * (decay * w2sq + noise) / delta).sqrt();

    let mut rep = BoundReport::new(Regime::NotApplicable);
    rep.set("param:f_N_eta", f);
    rep.set("param:f_times_w2", f * w2sq.sqrt());
    rep.set("param:epsilon", eps);
    rep.set("param:markov_factor", markov);
    rep.set("param:w1_term", w1_term);
    rep.set("param:confidence", 1.0 - 2.0 * delta);
    if markov > 1.0 {
        rep.flag(format!("the Markov factor {markov} exceeds 1; run longer or shrink eta"));
    }
    let mut rep = skeleton(&c, inp, &class, w1_term, rep)?;
    if rep.regime != Regime::Asymptotic {
        rep.flag(format!("stated for the asymptotic regime, got {}", rep.regime));
    }
    Ok(rep)
}
