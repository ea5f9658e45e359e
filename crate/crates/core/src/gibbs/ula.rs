use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Potential;
use crate::geometry::SampleCloud;
use crate::{Error, Result};

/// Unadjusted Langevin chain settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlaConfig {
    /// Number of states returned.
    pub n: usize,
    pub step: f64,
    pub burn_in: usize,
    /// Keep one state every `thinning` iterations.
    pub thinning: usize,
    /// Starting point; the origin when absent.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

impl UlaConfig {
    pub fn new(n: usize, step: f64, burn_in: usize, thinning: usize) -> Self {
        Self {
            n,
            step,
            burn_in,
            thinning,
            init: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("ULA needs n >= 1"));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::invalid(format!("ULA step must be positive, got {}", self.step)));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("ULA thinning must be >= 1"));
        }
        Ok(())
    }
}

const DIVERGENCE_NORM: f64 = 1e6;

/// `x <- x - step grad V(x) + sqrt(2 step) xi`, returning `n` thinned states
/// after burn-in.
pub fn ula_sample<P: Potential + ?Sized, R: Rng + ?Sized>(
    pot: &P,
    cfg: &UlaConfig,
    rng: &mut R,
) -> Result<SampleCloud> {
    cfg.validate()?;
    let d = pot.dim();
    let mut x = match &cfg.init {
        Some(v) if v.len() != d => {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            })
        }
        Some(v) => DVector::from_column_slice(v),
        None => DVector::zeros(d),
    };
    let noise = (2.0 * cfg.step).sqrt();
    let total = cfg.burn_in + cfg.n * cfg.thinning;
    let mut out = Vec::with_capacity(cfg.n);
    for it in 1..=total {
        let g = pot.gradient(&x);
        for (xi, gi) in x.iter_mut().zip(g.iter()) {
            let e: f64 = StandardNormal.sample(rng);
            *xi += -cfg.step * gi + noise * e;
        }
        let norm = x.norm();
        if !(norm <= DIVERGENCE_NORM) {
            return Err(Error::Diverged {
                iteration: it,
                norm,
            });
        }
        if it > cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0 {
            out.push(x.clone());
        }
    }
    SampleCloud::new(out)
}

/// Mean of `|x - proj_R(x)| = max(|x| - R, 0)` over a cloud.
pub fn f_r_from_cloud(cloud: &SampleCloud, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::invalid(format!("radius must be >= 0, got {r}")));
    }
    let total: f64 = cloud.points().iter().map(|x| (x.norm() - r).max(0.0)).sum();
    Ok(total / cloud.len() as f64)
}

/// Identity-coupling upper bound on `W1(P_R # Q*, Q*)` from a ULA run on the
/// Gibbs potential.
pub fn estimate_f_r<P: Potential + ?Sized, R: Rng + ?Sized>(
    pot: &P,
    r: f64,
    cfg: &UlaConfig,
    rng: &mut R,
) -> Result<f64> {
    f_r_from_cloud(&ula_sample(pot, cfg, rng)?, r)
}
