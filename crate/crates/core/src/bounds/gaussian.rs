//! Bounds for Gaussian priors and posteriors on all of `R^d`, obtained by
//! projecting onto the ball of radius `R` and paying the Gaussian tail.

use super::compact::mcallester_terms;
use super::{epsilon_m, BoundInputs, BoundReport, Ctx, Regime};
use crate::geometry::{tail_mass_bound, truncated_moment_bounds, CompactClass};
use crate::Result;

/// Low-data when `d >= m`, transitory when `m > d` and `d log d >= log m`,
/// asymptotic otherwise.
pub fn classify_regime(d: usize, m: usize) -> Regime {
    let (df, mf) = (d as f64, m as f64);
    if d >= m {
        Regime::LowData
    } else if df * df.ln() >= mf.ln() {
        Regime::Transitory
    } else {
        Regime::Asymptotic
    }
}

/// Shared inputs of the four bounds below.
struct Common {
    m: usize,
    d: usize,
    delta: f64,
    w1: f64,
    class: CompactClass,
    r: f64,
    /// `beta sqrt(2 beta) / m`
    t1: f64,
    /// `(M+1) t1`
    t2: f64,
    /// `2 t2 + eps_m`
    alpha_m: f64,
}

fn common(c: &Ctx, inp: &BoundInputs, rep: &mut BoundReport) -> Result<Common> {
    let m = c.count(inp.m, "m")?;
    let d = c.count(inp.d, "d")?;
    let delta = c.delta(inp.delta)?;
    let w1 = c.nonneg(inp.w1, "w1")?;
    let class = c.compact(inp)?;
    let r = c.radius(inp, &class, m, d, rep)?;
    let t1 = tail_mass_bound(&class, m);
    let (t2, _) = truncated_moment_bounds(&class, m);
    let em = epsilon_m(m, d, r, delta);
    rep.set("param:epsilon_m", em);
    rep.set("param:alpha_m", 2.0 * t2 + em);
    Ok(Common { m, d, delta, w1, class, r, t1, t2, alpha_m: 2.0 * t2 + em })
}

/// Bounded `[0,1]` loss, uniformly `K`-Lipschitz, `P, Q` in the compact class.
pub fn gaussian_lipschitz_bound(inp: &BoundInputs) -> Result<BoundReport> {
    let c = Ctx { bound: "gaussian_lipschitz" };
    let k = c.nonneg(inp.k, "K")?;
    let mut rep = BoundReport::new(Regime::NotApplicable);
    let g = common(&c, inp, &mut rep)?;
    rep.set("residual", 2.0 * g.t1);
    mcallester_terms(&mut rep, k, g.m, g.d, g.r, g.delta, g.w1 + g.alpha_m);
    Ok(rep.finish())
}

/// Unbounded uniformly Lipschitz loss: `|l(h,z) - l(h',z)| <= K|h-h'|`, `l(0,z) <= D`.
pub fn unbounded_lipschitz_bound(inp: &BoundInputs) -> Result<BoundReport> {
    let c = Ctx { bound: "unbounded_lipschitz" };
    let k = c.nonneg(inp.k, "K")?;
    let d_const = c.nonneg(inp.d_const, "D")?;
    let mut rep = BoundReport::new(Regime::NotApplicable);
    let g = common(&c, inp, &mut rep)?;
    rep.regime = classify_regime(g.d, g.m);
    let mf = g.m as f64;
    let d_r = d_const + 2.0 * k * g.r;
    rep.set("param:D_R", d_r);
    rep.set("residual", 2.0 * k * g.t2);
    let log_term = ((1.0 / g.delta).ln() + 2.0 * g.d as f64 * (2.0 * g.r * mf).ln_1p()) / mf;
    rep.set("sqrt:complexity", 2.0 * k * (2.0 * k + d_r) * log_term * (g.w1 + g.alpha_m));
    rep.set("sqrt:statistical", d_r * d_r * (3.0 * mf / g.delta).ln() / mf);
    Ok(rep.finish())
}

/// Bounded `[0,1]` smooth loss, which is `D_R = D + LR` Lipschitz on the ball.
pub fn smooth_bound(inp: &BoundInputs) -> Result<BoundReport> {
    let c = Ctx { bound: "smooth" };
    let l = c.nonneg(inp.l, "L")?;
    let d_const = c.nonneg(inp.d_const, "D")?;
    let mut rep = BoundReport::new(Regime::NotApplicable);
    let g = common(&c, inp, &mut rep)?;
    let d_r = d_const + l * g.r;
    rep.set("param:D_R", d_r);
    rep.set("residual", 2.0 * g.t1);
    mcallester_terms(&mut rep, d_r, g.m, g.d, g.r, g.delta, g.w1 + g.alpha_m);
    Ok(rep.finish())
}

/// Unbounded smooth loss with `l(0,z) <= D_ell`; on the ball the loss is
/// bounded by `C_R = D_ell + R D_R`.
pub fn unbounded_smooth_bound(inp: &BoundInputs) -> Result<BoundReport> {
    let c = Ctx { bound: "unbounded_smooth" };
    let l = c.nonneg(inp.l, "L")?;
    let d_const = c.nonneg(inp.d_const, "D")?;
    let d_ell = c.nonneg(inp.d_ell, "D_ell")?;
    let mut rep = BoundReport::new(Regime::NotApplicable);
    let g = common(&c, inp, &mut rep)?;
    rep.regime = classify_regime(g.d, g.m);
    let mf = g.m as f64;
    let d_r = d_const + l * g.r;
    let c_r = d_ell + g.r * d_r;
    rep.set("param:D_R", d_r);
    rep.set("param:C_R", c_r);
    rep.set("residual", (d_r + 0.5 * l * (g.class.big_m() + 1.0)) * g.t2);
    let log_term = ((3.0 / g.delta).ln() + 2.0 * g.d as f64 * (2.0 * g.r * mf).ln_1p()) / mf;
    rep.set("sqrt:complexity", 2.0 * d_r * (2.0 * d_r + c_r) * log_term * (g.w1 + g.alpha_m));
    rep.set("sqrt:statistical", c_r * c_r * (3.0 * mf / g.delta).ln() / mf);
    Ok(rep.finish())
}
