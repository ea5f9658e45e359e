//! Bures-Wasserstein SGD over Gaussian measures.
//!
//! Each step draws `X ~ N(m, S)`, moves the mean along `-grad V(X)` and
//! multiplies the covariance on both sides by `I - eta (hess V(X) - S^-1)`.
//! The mean is projected onto the ball of radius `M` and the covariance
//! spectrum is clipped at `1/alpha` from above (and at `alpha/9` from below,
//! which should never be active under a valid configuration).

mod reference;
mod schedule;

pub use reference::{vi_reference, ViReferenceConfig};
pub use schedule::{lambert_bound, schedule_for_accuracy, Schedule};

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::linalg::{sym_eigen, symmetrize};
use crate::geometry::{project_ball, w2_squared_gaussian, GaussianMeasure};
use crate::gibbs::Potential;
use crate::{rng_stream, Error, Result};

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BwSgdConfig {
    pub eta: f64,
    #[serde(rename = "N")]
    pub n_iter: usize,
    pub alpha: f64,
    #[serde(rename = "bigM")]
    pub big_m: f64,
    pub init: GaussianMeasure,
    pub seed: u64,
    /// Keep every `record_every`-th iterate (the last one is always kept).
    #[serde(default = "one")]
    pub record_every: usize,
}

impl BwSgdConfig {
    pub fn new(eta: f64, n_iter: usize, alpha: f64, big_m: f64, init: GaussianMeasure, seed: u64) -> Self {
        Self {
            eta,
            n_iter,
            alpha,
            big_m,
            init,
            seed,
            record_every: 1,
        }
    }

    /// Upper clip `1/alpha`.
    pub fn upper_clip(&self) -> f64 {
        1.0 / self.alpha
    }

    /// Lower clip `alpha/9`.
    pub fn lower_clip(&self) -> f64 {
        self.alpha / 9.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        let eta_max = self.alpha * self.alpha / 60.0;
        if self.eta > eta_max * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "eta = {} exceeds alpha^2/60 = {eta_max}",
                self.eta
            )));
        }
        if !(self.big_m.is_finite() && self.big_m >= 0.0) {
            return Err(Error::invalid(format!("bigM must be >= 0, got {}", self.big_m)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be >= 1"));
        }
        let (lo, hi) = self.init.eigen_extrema();
        let tol = 1e-12;
        if lo < self.lower_clip() * (1.0 - tol) || hi > self.upper_clip() * (1.0 + tol) {
            return Err(Error::invalid(format!(
                "initial covariance spectrum [{lo}, {hi}] is outside [alpha/9, 1/alpha] = [{}, {}]",
                self.lower_clip(),
                self.upper_clip()
            )));
        }
        let norm = self.init.mean().norm();
        if norm > self.big_m * (1.0 + tol) {
            return Err(Error::invalid(format!(
                "initial mean norm {norm} exceeds bigM = {}",
                self.big_m
            )));
        }
        Ok(())
    }
}

/// Output of one step together with flags about the clipping.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next: GaussianMeasure,
    pub eig_min: f64,
    pub eig_max: f64,
    pub lower_clamped: bool,
}

/// One step with a caller-supplied sample `x`.
pub fn step_with_sample<P: Potential + ?Sized>(
    pot: &P,
    q: &GaussianMeasure,
    x: &DVector<f64>,
    cfg: &BwSgdConfig,
) -> Result<StepOutcome> {
    let d = q.dim();
    if pot.dim() != d || x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: if pot.dim() != d { pot.dim() } else { x.len() },
        });
    }
    let (grad, hess) = pot.gradient_and_hessian(x)?;
    let mean = project_ball(&(q.mean() - grad * cfg.eta), cfg.big_m);
    let m_k = DMatrix::identity(d, d) - (hess - q.precision()) * cfg.eta;
    let cov = symmetrize(&(&m_k * q.cov() * &m_k));
    clip_and_build(mean, &cov, cfg)
}

fn clip_and_build(mean: DVector<f64>, cov: &DMatrix<f64>, cfg: &BwSgdConfig) -> Result<StepOutcome> {
    let eig = sym_eigen(cov)?;
    let (lo, hi) = (cfg.lower_clip(), cfg.upper_clip());
    let raw_min = eig.eigenvalues.min();
    let lower_clamped = raw_min < lo;
    if lower_clamped {
        log::warn!("covariance eigenvalue {raw_min} fell below alpha/9 = {lo}; clamping");
    }
    let vals = eig.eigenvalues.map(|v| v.clamp(lo, hi));
    let cov = symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()));
    let next = GaussianMeasure::new(mean, cov)?;
    Ok(StepOutcome {
        next,
        eig_min: vals.min(),
        eig_max: vals.max(),
        lower_clamped,
    })
}

/// One step drawing `X ~ q` from `rng`.
pub fn bwsgd_step<P: Potential + ?Sized, R: Rng + ?Sized>(
    pot: &P,
    q: &GaussianMeasure,
    cfg: &BwSgdConfig,
    rng: &mut R,
) -> Result<GaussianMeasure> {
    let x = q.sample_point(rng);
    Ok(step_with_sample(pot, q, &x, cfg)?.next)
}

/// Recorded iterate `k` of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub k: usize,
    pub measure: GaussianMeasure,
    pub eig_min: f64,
    pub eig_max: f64,
    /// Sample drawn from this iterate to produce the next one.
    pub sample: Option<DVector<f64>>,
    pub w2sq_to_reference: Option<f64>,
}

/// Iterates of a run, thinned by `record_every`, plus extrema over every step.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdTrajectory {
    pub points: Vec<TrajectoryPoint>,
    /// Smallest covariance eigenvalue over all iterates.
    pub min_eig: f64,
    /// Largest covariance eigenvalue over all iterates.
    pub max_eig: f64,
    /// Largest mean norm over all iterates.
    pub max_mean_norm: f64,
    /// Number of steps where the lower clip was active.
    pub lower_clamp_events: usize,
}

impl SgdTrajectory {
    pub fn last(&self) -> &GaussianMeasure {
        &self.points.last().unwrap().measure
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.points[0].measure.dim();
        let mut header = vec!["k".to_string()];
        header.extend((0..d).map(|i| format!("m{i}")));
        header.extend(["eig_min", "eig_max", "w2sq_to_reference"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for p in &self.points {
            let mut row = vec![p.k.to_string()];
            row.extend(p.measure.mean().iter().map(|v| v.to_string()));
            row.push(p.eig_min.to_string());
            row.push(p.eig_max.to_string());
            row.push(p.w2sq_to_reference.map(|v| v.to_string()).unwrap_or_default());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Runs `cfg.n_iter` steps from `cfg.init` with the stream seeded by `cfg.seed`.
pub fn bwsgd_run<P: Potential + ?Sized>(
    pot: &P,
    cfg: &BwSgdConfig,
    reference: Option<&GaussianMeasure>,
) -> Result<SgdTrajectory> {
    cfg.validate()?;
    if pot.dim() != cfg.init.dim() {
        return Err(Error::DimensionMismatch {
            expected: cfg.init.dim(),
            found: pot.dim(),
        });
    }
    let mut rng = rng_stream(cfg.seed);
    let w2 = |q: &GaussianMeasure| -> Result<Option<f64>> {
        reference.map(|r| w2_squared_gaussian(q, r)).transpose()
    };
    let (e0, e1) = cfg.init.eigen_extrema();
    let mut traj = SgdTrajectory {
        points: vec![],
        min_eig: e0,
        max_eig: e1,
        max_mean_norm: cfg.init.mean().norm(),
        lower_clamp_events: 0,
    };
    let mut current = TrajectoryPoint {
        k: 0,
        measure: cfg.init.clone(),
        eig_min: e0,
        eig_max: e1,
        sample: None,
        w2sq_to_reference: w2(&cfg.init)?,
    };
    for k in 0..cfg.n_iter {
        let x = current.measure.sample_point(&mut rng);
        let out = step_with_sample(pot, &current.measure, &x, cfg)?;
        traj.min_eig = traj.min_eig.min(out.eig_min);
        traj.max_eig = traj.max_eig.max(out.eig_max);
        traj.max_mean_norm = traj.max_mean_norm.max(out.next.mean().norm());
        traj.lower_clamp_events += out.lower_clamped as usize;
        let record = k % cfg.record_every == 0;
        let next_k = k + 1;
        let keep_next = next_k % cfg.record_every == 0 || next_k == cfg.n_iter;
        let next = TrajectoryPoint {
            k: next_k,
            w2sq_to_reference: if keep_next { w2(&out.next)? } else { None },
            measure: out.next,
            eig_min: out.eig_min,
            eig_max: out.eig_max,
            sample: None,
        };
        if record {
            current.sample = Some(x);
            traj.points.push(current);
        }
        current = next;
    }
    traj.points.push(current);
    Ok(traj)
}
