use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `exp(-alpha k eta) w2sq_init + 36 d eta / alpha^2`.
pub fn lambert_bound(alpha: f64, eta: f64, w2sq_init: f64, k: usize, d: usize) -> f64 {
    (-alpha * k as f64 * eta).exp() * w2sq_init + 36.0 * d as f64 * eta / (alpha * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub eta: f64,
    #[serde(rename = "N")]
    pub n_iter: usize,
}

/// Step size and iteration count reaching `E W2^2 <= eps^2`.
///
/// `eta = min(alpha^2 eps^2 / (72 d), alpha^2 / 60)` puts the noise floor
/// `36 d eta / alpha^2` at or below `eps^2 / 2`. The iteration count is the
/// larger of the nominal `c_sched d / (alpha^3 eps^2) log(max(w2/eps, e))` and
/// the count that drives the transient below `eps^2 / 2`.
pub fn schedule_for_accuracy(
    alpha: f64,
    d: usize,
    eps: f64,
    w2_init: f64,
    c_sched: f64,
) -> Result<Schedule> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    if !(w2_init.is_finite() && w2_init >= 0.0) {
        return Err(Error::invalid(format!("w2_init must be >= 0, got {w2_init}")));
    }
    if !(c_sched.is_finite() && c_sched > 0.0) {
        return Err(Error::invalid(format!("c_sched must be positive, got {c_sched}")));
    }
    if d == 0 {
        return Err(Error::invalid("dimension must be >= 1"));
    }
    let df = d as f64;
    let a2 = alpha * alpha;
    let eta = (a2 * eps * eps / (72.0 * df)).min(a2 / 60.0);
    let nominal =
        c_sched * df / (alpha * a2 * eps * eps) * (w2_init / eps).max(std::f64::consts::E).ln();
    let ratio = 2.0 * w2_init * w2_init / (eps * eps);
    let transient = if ratio > 1.0 { ratio.ln() / (alpha * eta) } else { 0.0 };
    let n = nominal.max(transient).ceil();
    if n > usize::MAX as f64 / 2.0 {
        return Err(Error::invalid(format!("schedule needs {n:e} iterations")));
    }
    Ok(Schedule {
        eta,
        n_iter: n as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_examples() {
        let floor = 36.0 * 3.0 * 0.01 / 0.25;
        assert!((lambert_bound(0.5, 0.01, 2.0, 0, 3) - (2.0 + floor)).abs() < 1e-15);
        assert!((lambert_bound(0.5, 0.01, 2.0, 1_000_000, 3) - floor).abs() < 1e-15);
        let v = lambert_bound(1.0, 1.0 / 60.0, 1.0, 60, 2);
        assert!((v - ((-1f64).exp() + 1.2)).abs() <= 1e-10 * v);
    }

    #[test]
    fn schedule_clamps_and_reaches_accuracy() {
        for alpha in [0.1, 0.5, 0.8, 1.0] {
            for d in [1, 3, 10] {
                for eps in [1.0, 0.3, 0.1, 0.03] {
                    for w2 in [0.0, 0.05, 1.0, 10.0] {
                        let s = schedule_for_accuracy(alpha, d, eps, w2, 2.0).unwrap();
                        assert!(s.eta <= alpha * alpha / 60.0);
                        let b = lambert_bound(alpha, s.eta, w2 * w2, s.n_iter, d);
                        assert!(b <= eps * eps * (1.0 + 1e-12), "{alpha} {d} {eps} {w2}: {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn halving_eps_quadruples_iterations() {
        for (alpha, d, w2) in [(0.1, 2, 1.0), (0.8, 3, 1.0), (1.0, 5, 3.0), (0.5, 1, 0.2)] {
            let mut eps = 0.4;
            for _ in 0..4 {
                let a = schedule_for_accuracy(alpha, d, eps, w2, 2.0).unwrap();
                let b = schedule_for_accuracy(alpha, d, eps / 2.0, w2, 2.0).unwrap();
                // the slack of 3 only absorbs the ceiling of the smaller count
                assert!(b.n_iter >= 4 * a.n_iter - 3, "{alpha} {d} {eps}: {} vs {}", a.n_iter, b.n_iter);
                eps /= 2.0;
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(schedule_for_accuracy(0.0, 1, 0.1, 1.0, 2.0).is_err());
        assert!(schedule_for_accuracy(1.0, 1, 0.0, 1.0, 2.0).is_err());
        assert!(schedule_for_accuracy(1.0, 0, 0.1, 1.0, 2.0).is_err());
    }
}
