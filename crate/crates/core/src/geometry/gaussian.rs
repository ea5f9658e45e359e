use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::linalg::{asymmetry, eigen_extrema, psd_sqrt, symmetrize};
use super::SampleCloud;
use crate::{Error, Result};

/// A non-degenerate Gaussian `N(mean, cov)` on `R^d`.
///
/// Construction symmetrises the covariance and rejects it unless it is
/// symmetric to within [`Self::SYMMETRY_TOL`] (relative to its largest entry)
/// and every eigenvalue exceeds [`Self::MIN_EIGENVALUE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for GaussianMeasure {
    type Error = Error;

    fn try_from(r: GaussianRepr) -> Result<Self> {
        let d = r.mean.len();
        if r.cov.len() != d || r.cov.iter().any(|row| row.len() != d) {
            return Err(Error::invalid(format!(
                "covariance must be {d}x{d} to match the mean"
            )));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| r.cov[i][j]);
        GaussianMeasure::new(DVector::from_vec(r.mean), cov)
    }
}

impl From<GaussianMeasure> for GaussianRepr {
    fn from(g: GaussianMeasure) -> Self {
        let d = g.dim();
        GaussianRepr {
            mean: g.mean.iter().cloned().collect(),
            cov: (0..d).map(|i| (0..d).map(|j| g.cov[(i, j)]).collect()).collect(),
        }
    }
}

impl GaussianMeasure {
    /// Eigenvalues at or below this are rejected.
    pub const MIN_EIGENVALUE: f64 = 1e-12;
    /// Allowed asymmetry of the covariance, relative to `max(1, max |cov_ij|)`.
    pub const SYMMETRY_TOL: f64 = 1e-10;

    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::invalid("Gaussian dimension must be at least 1"));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("Gaussian parameters must be finite"));
        }
        let scale = cov.abs().max().max(1.0);
        if asymmetry(&cov) > Self::SYMMETRY_TOL * scale {
            return Err(Error::NotSpd(format!(
                "covariance asymmetry {:e} exceeds tolerance",
                asymmetry(&cov)
            )));
        }
        let cov = symmetrize(&cov);
        let (lo, _) = eigen_extrema(&cov)?;
        if lo <= Self::MIN_EIGENVALUE {
            return Err(Error::NotSpd(format!("smallest eigenvalue {lo:e}")));
        }
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::NotSpd("Cholesky factorisation failed".into()))?
            .l();
        Ok(Self { mean, cov, chol })
    }

    /// `N(mean, variance * I)`.
    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * variance)
    }

    /// `N(0, I_d)`.
    pub fn standard(d: usize) -> Result<Self> {
        Self::isotropic(DVector::zeros(d), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of the covariance.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// Smallest and largest covariance eigenvalue.
    pub fn eigen_extrema(&self) -> (f64, f64) {
        eigen_extrema(&self.cov).expect("covariance validated at construction")
    }

    /// Inverse covariance.
    pub fn precision(&self) -> DMatrix<f64> {
        let mut inv = Cholesky::new(self.cov.clone())
            .expect("covariance validated at construction")
            .inverse();
        inv = symmetrize(&inv);
        inv
    }

    /// One draw `mean + L xi` with `xi ~ N(0, I)`.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.chol * xi
    }

    /// `n` i.i.d. draws. Deterministic given the stream state.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<SampleCloud> {
        if n == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        SampleCloud::new((0..n).map(|_| self.sample_point(rng)).collect())
    }

    /// Log density at `x`.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let d = self.dim() as f64;
        let diff = x - &self.mean;
        let y = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor is non-singular");
        let log_det: f64 = self.chol.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * (y.norm_squared() + log_det + d * (2.0 * std::f64::consts::PI).ln())
    }
}

fn check_dims(p: &GaussianMeasure, q: &GaussianMeasure) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    Ok(())
}

/// Squared 2-Wasserstein distance between Gaussians (Bures formula):
/// `|m1 - m2|^2 + tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2})`.
pub fn w2_squared_gaussian(p: &GaussianMeasure, q: &GaussianMeasure) -> Result<f64> {
    check_dims(p, q)?;
    let mean_term = (p.mean() - q.mean()).norm_squared();
    let s1_half = psd_sqrt(p.cov())?;
    let cross = psd_sqrt(&(&s1_half * q.cov() * &s1_half))?;
    let bures = p.cov().trace() + q.cov().trace() - 2.0 * cross.trace();
    Ok(mean_term + bures.max(0.0))
}

/// 2-Wasserstein distance between Gaussians.
pub fn w2_gaussian(p: &GaussianMeasure, q: &GaussianMeasure) -> Result<f64> {
    Ok(w2_squared_gaussian(p, q)?.sqrt())
}

/// `KL(q || p)` between Gaussians.
pub fn kl_gaussian(q: &GaussianMeasure, p: &GaussianMeasure) -> Result<f64> {
    check_dims(p, q)?;
    let d = q.dim() as f64;
    let p_prec = p.precision();
    let diff = p.mean() - q.mean();
    let quad = (diff.transpose() * &p_prec * &diff)[(0, 0)];
    let trace = (&p_prec * q.cov()).trace();
    let log_det = |g: &GaussianMeasure| -> f64 {
        g.cholesky_factor().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0
    };
    let kl = 0.5 * (trace + quad - d + log_det(p) - log_det(q));
    Ok(kl.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_stream;

    fn g1(mean: f64, var: f64) -> GaussianMeasure {
        GaussianMeasure::isotropic(DVector::from_element(1, mean), var).unwrap()
    }

    #[test]
    fn w2_identity_is_zero() {
        let p = GaussianMeasure::standard(3).unwrap();
        assert!(w2_gaussian(&p, &p).unwrap() < 1e-12);
    }

    #[test]
    fn w2_pure_translation() {
        assert!((w2_gaussian(&g1(0.0, 1.0), &g1(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w2_one_dimensional_scale() {
        // standard deviations 2 and 3
        assert!((w2_gaussian(&g1(0.0, 4.0), &g1(0.0, 9.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w2_rejects_dimension_mismatch() {
        let p = GaussianMeasure::standard(2).unwrap();
        let q = GaussianMeasure::standard(3).unwrap();
        assert!(matches!(
            w2_gaussian(&p, &q),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_rejects_bad_covariances() {
        let m = DVector::zeros(2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            GaussianMeasure::new(m.clone(), asym),
            Err(Error::NotSpd(_))
        ));
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            GaussianMeasure::new(m.clone(), singular),
            Err(Error::NotSpd(_))
        ));
        // smallest admissible eigenvalue is strictly above 1e-12
        let tiny = DMatrix::identity(2, 2) * 1e-12;
        assert!(GaussianMeasure::new(m.clone(), tiny).is_err());
        let small = DMatrix::identity(2, 2) * 1e-11;
        assert!(GaussianMeasure::new(m, small).is_ok());
    }

    #[test]
    fn kl_identity_is_zero() {
        let p = g1(0.3, 2.0);
        assert!(kl_gaussian(&p, &p).unwrap() < 1e-14);
    }

    fn kl_quadrature_1d(q: &GaussianMeasure, p: &GaussianMeasure) -> f64 {
        // composite Simpson on [mq - 12 sq, mq + 12 sq]
        let mq = q.mean()[0];
        let sq = q.cov()[(0, 0)].sqrt();
        let (a, b) = (mq - 12.0 * sq, mq + 12.0 * sq);
        let n = 20_000;
        let h = (b - a) / n as f64;
        let f = |x: f64| {
            let x = DVector::from_element(1, x);
            let lq = q.log_density(&x);
            lq.exp() * (lq - p.log_density(&x))
        };
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn kl_matches_quadrature_in_one_dimension() {
        let q = g1(1.0, 1.0);
        let p = g1(0.0, 1.0);
        let oracle = kl_quadrature_1d(&q, &p);
        assert!((oracle - 0.5).abs() < 1e-9);
        assert!((kl_gaussian(&q, &p).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn kl_matches_quadrature_for_product_measure() {
        // N(0, 2 I_2) against N(0, I_2) factorises into two identical 1-d terms
        let oracle = 2.0 * kl_quadrature_1d(&g1(0.0, 2.0), &g1(0.0, 1.0));
        let q = GaussianMeasure::isotropic(DVector::zeros(2), 2.0).unwrap();
        let p = GaussianMeasure::standard(2).unwrap();
        assert!((kl_gaussian(&q, &p).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn sample_mean_converges() {
        let q = GaussianMeasure::isotropic(DVector::from_element(2, 1.0), 1.0).unwrap();
        let mut rng = rng_stream(11);
        let cloud = q.sample(100_000, &mut rng).unwrap();
        let mean = cloud.mean();
        assert!((mean[0] - 1.0).abs() < 0.02 && (mean[1] - 1.0).abs() < 0.02);
    }

    #[test]
    fn sample_is_deterministic_per_seed() {
        let q = GaussianMeasure::standard(3).unwrap();
        let a = q.sample(50, &mut rng_stream(5)).unwrap();
        let b = q.sample(50, &mut rng_stream(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn serde_round_trip_validates() {
        let g = GaussianMeasure::new(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: GaussianMeasure = serde_json::from_str(&json).unwrap();
        assert_eq!(g, back);
        let bad = r#"{"mean":[0.0],"cov":[[-1.0]]}"#;
        assert!(serde_json::from_str::<GaussianMeasure>(bad).is_err());
    }
}
