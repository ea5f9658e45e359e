use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::GaussianMeasure;
use crate::{Error, Result};

/// The compact slice `C_{alpha,beta,M}` of the Bures-Wasserstein space:
/// Gaussians with `|m| <= M` and `alpha I <= Sigma <= beta I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CompactRepr", into = "CompactRepr")]
pub struct CompactClass {
    alpha: f64,
    beta: f64,
    big_m: f64,
}

#[derive(Serialize, Deserialize)]
struct CompactRepr {
    alpha: f64,
    beta: f64,
    #[serde(rename = "bigM")]
    big_m: f64,
}

impl TryFrom<CompactRepr> for CompactClass {
    type Error = Error;
    fn try_from(r: CompactRepr) -> Result<Self> {
        CompactClass::new(r.alpha, r.beta, r.big_m)
    }
}

impl From<CompactClass> for CompactRepr {
    fn from(c: CompactClass) -> Self {
        CompactRepr {
            alpha: c.alpha,
            beta: c.beta,
            big_m: c.big_m,
        }
    }
}

/// Where a Gaussian sits relative to a compact class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Membership {
    pub mean_norm: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl CompactClass {
    pub fn new(alpha: f64, beta: f64, big_m: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta >= alpha && beta.is_finite()) {
            return Err(Error::invalid(format!(
                "beta must satisfy alpha <= beta, got alpha={alpha}, beta={beta}"
            )));
        }
        if !(big_m >= 0.0 && big_m.is_finite()) {
            return Err(Error::invalid(format!("M must be nonnegative, got {big_m}")));
        }
        Ok(Self { alpha, beta, big_m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn membership(&self, q: &GaussianMeasure) -> Membership {
        let (eig_min, eig_max) = q.eigen_extrema();
        Membership {
            mean_norm: q.mean().norm(),
            eig_min,
            eig_max,
        }
    }

    /// Membership test with an absolute slack `tol` on every inequality.
    pub fn contains(&self, q: &GaussianMeasure, tol: f64) -> bool {
        let m = self.membership(q);
        m.mean_norm <= self.big_m + tol
            && m.eig_min >= self.alpha - tol
            && m.eig_max <= self.beta + tol
    }
}

/// Projection onto the closed ball of radius `r` centred at the origin.
pub fn project_ball(x: &DVector<f64>, r: f64) -> DVector<f64> {
    let norm = x.norm();
    if norm <= r {
        x.clone()
    } else {
        x * (r / norm)
    }
}

fn check_rad_inputs(m: usize, d: usize) -> Result<()> {
    if d < 3 {
        return Err(Error::invalid(format!("the Rad radius needs d >= 3, got d={d}")));
    }
    if m == 0 {
        return Err(Error::invalid("the Rad radius needs m >= 1"));
    }
    Ok(())
}

/// Right-hand sides of the three `Rad` inequalities, in order:
///
/// 1. `M + 1`
/// 2. `M + sqrt(2 beta) sqrt(d log(d sqrt(beta) / sqrt(pi alpha)) + 2 log m)`
/// 3. `M + sqrt(2 beta) sqrt(1 + d/2)`
///
/// The term under the second root is floored at zero.
pub fn rad_conditions(c: &CompactClass, m: usize, d: usize) -> Result<[f64; 3]> {
    check_rad_inputs(m, d)?;
    let (alpha, beta, big_m) = (c.alpha, c.beta, c.big_m);
    let df = d as f64;
    let root2b = (2.0 * beta).sqrt();
    let log_arg = df * beta.sqrt() / (PI * alpha).sqrt();
    let inner = (df * log_arg.ln() + 2.0 * (m as f64).ln()).max(0.0);
    Ok([
        big_m + 1.0,
        big_m + root2b * inner.sqrt(),
        big_m + root2b * (1.0 + df / 2.0).sqrt(),
    ])
}

/// Smallest radius satisfying all three `Rad` inequalities.
pub fn rad_radius(c: &CompactClass, m: usize, d: usize) -> Result<f64> {
    let conds = rad_conditions(c, m, d)?;
    Ok(conds.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Upper bound `beta sqrt(2 beta) / m` on `Q(|h| > R)` for `Q` in the class
/// and `R = rad_radius`.
pub fn tail_mass_bound(c: &CompactClass, m: usize) -> f64 {
    c.beta * (2.0 * c.beta).sqrt() / m as f64
}

/// Upper bounds on `E[|h| 1(|h| > R)]` and `E[|h|^2 1(|h| > R)]`:
/// `(M+1) t` and `(M+1)^2 t` with `t = tail_mass_bound`.
pub fn truncated_moment_bounds(c: &CompactClass, m: usize) -> (f64, f64) {
    let t = tail_mass_bound(c, m);
    let k = c.big_m + 1.0;
    (k * t, k * k * t)
}
