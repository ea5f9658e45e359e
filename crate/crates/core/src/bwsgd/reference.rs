//! The Gaussian variational target `argmin_Q KL(Q, e^-V)` for a general
//! potential, computed by noise-free BW gradient descent.
//!
//! Its fixed point satisfies `E_Q grad V = 0` and `E_Q hess V = S^-1`. The
//! expectations use a product Gauss-Hermite rule, or a fixed Monte Carlo
//! sample when the dimension makes the product rule too large.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::linalg::{sym_eigen, symmetrize};
use crate::geometry::GaussianMeasure;
use crate::gibbs::Potential;
use crate::{rng_stream, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViReferenceConfig {
    pub step: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Largest number of cubature nodes; more dimensions fall back to a fixed
    /// sample of this size.
    pub node_budget: usize,
    pub seed: u64,
}

impl Default for ViReferenceConfig {
    fn default() -> Self {
        Self {
            step: 0.5,
            max_iter: 100_000,
            tol: 1e-11,
            node_budget: 4000,
            seed: 0,
        }
    }
}

/// Probabilists' Gauss-Hermite nodes and weights (summing to 1) by the
/// Golub-Welsch eigenvalue method.
pub(crate) fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut j = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = sym_eigen(&j)?;
    let nodes = eig.eigenvalues.iter().copied().collect();
    let weights = (0..n).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
    Ok((nodes, weights))
}

struct Rule {
    nodes: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

fn build_rule(d: usize, cfg: &ViReferenceConfig) -> Result<Rule> {
    let per_dim = ((cfg.node_budget as f64).powf(1.0 / d as f64).floor() as usize).min(7);
    if per_dim >= 3 {
        let (x, w) = gauss_hermite(per_dim)?;
        let total = per_dim.pow(d as u32);
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            nodes.push(DVector::from_iterator(d, idx.iter().map(|&i| x[i])));
            weights.push(idx.iter().map(|&i| w[i]).product());
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_dim {
                    break;
                }
                *slot = 0;
            }
        }
        return Ok(Rule { nodes, weights });
    }
    // antithetic pairs keep the odd moments exact
    let mut rng = rng_stream(cfg.seed);
    let half = cfg.node_budget.max(2) / 2;
    let mut nodes = Vec::with_capacity(2 * half);
    for _ in 0..half {
        let xi = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
        nodes.push(-&xi);
        nodes.push(xi);
    }
    let w = 1.0 / nodes.len() as f64;
    Ok(Rule {
        weights: vec![w; nodes.len()],
        nodes,
    })
}

/// Gaussian minimiser of `KL(., e^-V)` started from `init`.
pub fn vi_reference<P: Potential + ?Sized>(
    pot: &P,
    init: &GaussianMeasure,
    cfg: &ViReferenceConfig,
) -> Result<GaussianMeasure> {
    let d = pot.dim();
    if init.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: init.dim(),
        });
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::invalid("VI reference step must be positive"));
    }
    let rule = build_rule(d, cfg)?;
    let mut q = init.clone();
    for _ in 0..cfg.max_iter {
        let l = q.cholesky_factor();
        let mut g = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);
        for (xi, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = q.mean() + l * xi;
            g += pot.gradient(&x) * *w;
            h += pot.hessian(&x)? * *w;
        }
        let mean = q.mean() - g * cfg.step;
        let m_k = DMatrix::identity(d, d) - (h - q.precision()) * cfg.step;
        let cov = symmetrize(&(&m_k * q.cov() * &m_k));
        let next = GaussianMeasure::new(mean, cov)?;
        let change = (next.mean() - q.mean()).norm() + (next.cov() - q.cov()).norm();
        q = next;
        if change < cfg.tol {
            return Ok(q);
        }
    }
    Err(Error::Numerical(format!(
        "VI reference did not converge in {} iterations",
        cfg.max_iter
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{gibbs_closed_form, GibbsPotential};
    use crate::loss::{builtin_loss, DataModel, Dataset, LossParams};
    use crate::stats::mean_and_std_error;

    #[test]
    fn hermite_rule_moments() {
        let (x, w) = gauss_hermite(7).unwrap();
        let moment = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
        assert!((moment(0) - 1.0).abs() < 1e-14);
        assert!(moment(1).abs() < 1e-14);
        assert!((moment(2) - 1.0).abs() < 1e-13);
        assert!((moment(4) - 3.0).abs() < 1e-12);
        assert!((moment(12) - 10395.0).abs() < 1e-7);
    }

    #[test]
    fn quadratic_reference_is_the_closed_form() {
        let loss = builtin_loss("quadratic_plain", &LossParams::new()).unwrap();
        let s = Dataset::new(vec![DVector::from_vec(vec![1.0, 2.0, 0.0]), DVector::from_vec(vec![0.0, 1.0, -1.0])]).unwrap();
        let prior = GaussianMeasure::isotropic(DVector::zeros(3), 2.0).unwrap();
        let gp = GibbsPotential::new(loss, s, prior, 0.3, false).unwrap();
        let q = vi_reference(&gp, &GaussianMeasure::standard(3).unwrap(), &ViReferenceConfig::default()).unwrap();
        let exact = gibbs_closed_form(&gp).unwrap();
        assert!((q.mean() - exact.mean()).norm() < 1e-9);
        assert!((q.cov() - exact.cov()).norm() < 1e-9);
    }

    fn logistic_gp(d: usize) -> GibbsPotential {
        let loss = builtin_loss("logistic_margin", &[("x_bound".to_string(), 2.0)].into()).unwrap();
        let data = DataModel::LabeledBall {
            w_star: (0..d).map(|i| 1.0 - 0.3 * i as f64).collect(),
            x_bound: 2.0,
            label_noise: 0.1,
        };
        let s = data.sample_dataset(50, &mut rng_stream(5)).unwrap();
        let prior = GaussianMeasure::isotropic(DVector::zeros(d), 1.25).unwrap();
        GibbsPotential::new(loss, s, prior, 0.8, true).unwrap()
    }

    // independent Monte Carlo check of the two stationarity conditions
    fn assert_stationary(gp: &GibbsPotential, q: &GaussianMeasure) {
        let d = gp.dim();
        let mut rng = rng_stream(77);
        let n = 20_000;
        let mut grads = vec![vec![]; d];
        let mut hess = vec![vec![]; d * d];
        for _ in 0..n {
            let x = q.sample_point(&mut rng);
            let g = gp.gradient(&x);
            let h = gp.hessian(&x).unwrap();
            for i in 0..d {
                grads[i].push(g[i]);
            }
            for i in 0..d * d {
                hess[i].push(h[i]);
            }
        }
        let prec = q.precision();
        for i in 0..d {
            let (m, se) = mean_and_std_error(&grads[i]);
            assert!(m.abs() <= 4.0 * se + 1e-9, "grad {i}: {m} (se {se})");
        }
        for i in 0..d * d {
            let (m, se) = mean_and_std_error(&hess[i]);
            assert!((m - prec[i]).abs() <= 4.0 * se + 1e-9, "hess {i}: {m} vs {} (se {se})", prec[i]);
        }
    }

    #[test]
    fn logistic_reference_is_stationary() {
        let gp = logistic_gp(3);
        let q = vi_reference(&gp, &GaussianMeasure::standard(3).unwrap(), &ViReferenceConfig::default()).unwrap();
        assert_stationary(&gp, &q);
    }

    #[test]
    fn high_dimension_uses_the_sample_rule() {
        let gp = logistic_gp(6);
        let cfg = ViReferenceConfig { node_budget: 2000, ..Default::default() };
        let q = vi_reference(&gp, &GaussianMeasure::standard(6).unwrap(), &cfg).unwrap();
        let exact_cfg = ViReferenceConfig { node_budget: 5usize.pow(6), ..Default::default() };
        let r = vi_reference(&gp, &GaussianMeasure::standard(6).unwrap(), &exact_cfg).unwrap();
        assert!((q.mean() - r.mean()).norm() < 0.02);
        assert!((q.cov() - r.cov()).norm() < 0.02);
    }
}
