//! The Gibbs potential `V_S(h) = c R_S(h) - log dP(h)`, its derivatives, the
//! closed-form posterior for quadratic losses and a Langevin sampler.
//!
//! The coefficient is `c = lambda / (2K)` when `scale_by_2k` is set and
//! `c = lambda` otherwise. Additive constants are dropped.

mod ula;

pub use ula::{estimate_f_r, f_r_from_cloud, ula_sample, UlaConfig};

use nalgebra::{DMatrix, DVector};

use crate::geometry::linalg::{eigen_extrema, symmetrize};
use crate::geometry::GaussianMeasure;
use crate::loss::{empirical_risk, Dataset, LossKind, LossModel};
use crate::{Error, Result};

/// A twice differentiable potential on `R^d`. BW-SGD and the samplers are
/// generic over it.
pub trait Potential: Sync {
    fn dim(&self) -> usize;
    fn value(&self, h: &DVector<f64>) -> f64;
    fn gradient(&self, h: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, h: &DVector<f64>) -> Result<DMatrix<f64>>;

    fn gradient_and_hessian(&self, h: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        Ok((self.gradient(h), self.hessian(h)?))
    }
}

#[derive(Debug, Clone)]
pub struct GibbsPotential {
    loss: LossModel,
    dataset: Dataset,
    prior: GaussianMeasure,
    lambda: f64,
    scale_by_2k: bool,
    prior_precision: DMatrix<f64>,
    data_mean: DVector<f64>,
    /// Features (one row per point) and labels, cached for margin losses.
    design: Option<(DMatrix<f64>, DVector<f64>)>,
}

/// Certified bounds `lower I <= hess V_S <= upper I`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianBounds {
    pub lower: f64,
    pub upper: f64,
    /// Conditions of the strongly-log-concave setting that fail here.
    pub issues: Vec<String>,
}

impl GibbsPotential {
    pub fn new(
        loss: LossModel,
        dataset: Dataset,
        prior: GaussianMeasure,
        lambda: f64,
        scale_by_2k: bool,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        loss.check_dims(prior.dim(), dataset.z_dim())?;
        if scale_by_2k {
            let k = loss.k().ok_or_else(|| {
                Error::invalid(format!(
                    "scale_by_2k needs a uniformly Lipschitz loss; `{}` has no K",
                    loss.name()
                ))
            })?;
            if lambda > 2.0 * k {
                return Err(Error::invalid(format!(
                    "lambda = {lambda} exceeds 2K = {}",
                    2.0 * k
                )));
            }
        }
        let prior_precision = prior.precision();
        let data_mean = dataset.as_cloud().mean();
        let design = loss.margin_derivatives(0.0).map(|_| {
            let d = prior.dim();
            let pts = dataset.points();
            let x = DMatrix::from_fn(pts.len(), d, |i, j| pts[i][j]);
            let y = DVector::from_iterator(pts.len(), pts.iter().map(|z| z[d]));
            (x, y)
        });
        Ok(Self {
            loss,
            dataset,
            prior,
            lambda,
            scale_by_2k,
            prior_precision,
            data_mean,
            design,
        })
    }

    pub fn loss(&self) -> &LossModel {
        &self.loss
    }
    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }
    pub fn prior(&self) -> &GaussianMeasure {
        &self.prior
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn scale_by_2k(&self) -> bool {
        self.scale_by_2k
    }

    /// Coefficient in front of `R_S`.
    pub fn coef(&self) -> f64 {
        if self.scale_by_2k {
            self.lambda / (2.0 * self.loss.k().unwrap())
        } else {
            self.lambda
        }
    }

    /// The same potential with the loss divided by its smoothness constant,
    /// so that the loss part of the Hessian is at most `coef * I`.
    pub fn smoothness_normalized(&self) -> Result<Self> {
        let l = self
            .loss
            .l()
            .ok_or_else(|| Error::invalid(format!("loss `{}` has no smoothness constant", self.loss.name())))?;
        let loss = self.loss.scaled(1.0 / l)?;
        if self.scale_by_2k && self.lambda > 2.0 * loss.k().unwrap() {
            return Err(Error::invalid(
                "after normalization lambda exceeds 2K; lower lambda",
            ));
        }
        Self::new(loss, self.dataset.clone(), self.prior.clone(), self.lambda, self.scale_by_2k)
    }

    /// Sandwich on the Hessian from the prior precision spectrum and the
    /// loss smoothness. Convex losses contribute nothing to the lower bound.
    pub fn hessian_bounds(&self) -> Result<HessianBounds> {
        let l = self.loss.l().ok_or_else(|| {
            Error::invalid(format!("loss `{}` has no smoothness constant", self.loss.name()))
        })?;
        let (pmin, pmax) = eigen_extrema(&self.prior_precision)?;
        let c = self.coef();
        let lower = if self.loss.is_globally_convex() {
            pmin
        } else {
            pmin - c * l
        };
        let upper = pmax + c * l;
        let mut issues = vec![];
        if lower <= 0.0 {
            issues.push(format!("Hessian lower bound {lower} is not positive"));
        }
        if upper > 1.0 + 1e-12 {
            issues.push(format!("Hessian upper bound {upper} exceeds 1"));
        }
        if !self.loss.is_globally_convex() {
            issues.push(format!("loss `{}` is not convex on all of R^d", self.loss.name()));
        }
        if !self.loss.is_uniformly_lipschitz() {
            issues.push(format!("loss `{}` is not uniformly Lipschitz", self.loss.name()));
        }
        if (l - 1.0).abs() > 1e-12 {
            issues.push(format!("loss smoothness is {l}, not 1"));
        }
        if self.prior.mean().norm() > 0.0 {
            issues.push("prior mean is not 0".into());
        }
        let cov = self.prior.cov();
        let g = cov[(0, 0)];
        if (cov - DMatrix::identity(cov.nrows(), cov.ncols()) * g).norm() > 1e-12 * g.abs().max(1.0) {
            issues.push("prior covariance is not isotropic".into());
        }
        if !self.scale_by_2k {
            issues.push("potential is not scaled by 1/(2K)".into());
        }
        Ok(HessianBounds { lower, upper, issues })
    }

    /// Smallest and largest Hessian eigenvalues seen over `points`.
    pub fn hessian_extrema_at(&self, points: &[DVector<f64>]) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in points {
            let (a, b) = eigen_extrema(&self.hessian(p)?)?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Ok((lo, hi))
    }

    /// Risk gradient and Hessian from the cached design in one pass.
    fn margin_risk_derivatives(&self, h: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let (x, y) = self.design.as_ref()?;
        let m = y.len() as f64;
        let mut w = DVector::zeros(y.len());
        let mut scaled = x.clone();
        for (i, (xh, yi)) in (x * h).iter().zip(y.iter()).enumerate() {
            let (d1, d2) = self.loss.margin_derivatives(-yi * xh).unwrap();
            w[i] = -yi * d1 / m;
            scaled.row_mut(i).scale_mut(yi * yi * d2 / m);
        }
        Some((x.tr_mul(&w), x.tr_mul(&scaled)))
    }

    fn risk_gradient(&self, h: &DVector<f64>) -> DVector<f64> {
        if let LossKind::QuadraticPlain { .. } = self.loss.kind() {
            return (h - &self.data_mean) * self.loss.scale();
        }
        if let Some((x, y)) = &self.design {
            let m = y.len() as f64;
            let w = DVector::from_iterator(
                y.len(),
                (x * h).iter().zip(y.iter()).map(|(xh, yi)| {
                    let (d1, _) = self.loss.margin_derivatives(-yi * xh).unwrap();
                    -yi * d1 / m
                }),
            );
            return x.tr_mul(&w);
        }
        let mut g = DVector::zeros(h.len());
        for z in self.dataset.points() {
            g += self.loss.gradient(h, z);
        }
        g / self.dataset.len() as f64
    }

    fn risk_hessian(&self, h: &DVector<f64>) -> DMatrix<f64> {
        let d = h.len();
        if let LossKind::QuadraticPlain { .. } = self.loss.kind() {
            return DMatrix::identity(d, d) * self.loss.scale();
        }
        if let Some((x, y)) = &self.design {
            let m = y.len() as f64;
            let mut scaled = x.clone();
            for (i, (xh, yi)) in (x * h).iter().zip(y.iter()).enumerate() {
                let (_, d2) = self.loss.margin_derivatives(-yi * xh).unwrap();
                scaled.row_mut(i).scale_mut(yi * yi * d2 / m);
            }
            return x.tr_mul(&scaled);
        }
        let mut out = DMatrix::zeros(d, d);
        for z in self.dataset.points() {
            out += self.loss.hessian(h, z);
        }
        out / self.dataset.len() as f64
    }
}

impl Potential for GibbsPotential {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn value(&self, h: &DVector<f64>) -> f64 {
        let r = h - self.prior.mean();
        let quad = 0.5 * r.dot(&(&self.prior_precision * &r));
        if self.lambda == 0.0 {
            return quad;
        }
        self.coef() * empirical_risk(&self.loss, h, &self.dataset) + quad
    }

    fn gradient(&self, h: &DVector<f64>) -> DVector<f64> {
        let prior_part = &self.prior_precision * (h - self.prior.mean());
        if self.lambda == 0.0 {
            return prior_part;
        }
        self.risk_gradient(h) * self.coef() + prior_part
    }

    fn hessian(&self, h: &DVector<f64>) -> Result<DMatrix<f64>> {
        if self.lambda == 0.0 {
            return Ok(self.prior_precision.clone());
        }
        Ok(symmetrize(&(self.risk_hessian(h) * self.coef() + &self.prior_precision)))
    }

    fn gradient_and_hessian(&self, h: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        match (self.lambda > 0.0).then(|| self.margin_risk_derivatives(h)).flatten() {
            Some((g, hs)) => {
                let c = self.coef();
                Ok((
                    g * c + &self.prior_precision * (h - self.prior.mean()),
                    symmetrize(&(hs * c + &self.prior_precision)),
                ))
            }
            None => Ok((self.gradient(h), self.hessian(h)?)),
        }
    }
}

/// The exact Gibbs posterior when `V_S` is quadratic.
pub fn gibbs_closed_form(gp: &GibbsPotential) -> Result<GaussianMeasure> {
    if !matches!(gp.loss.kind(), LossKind::QuadraticPlain { .. }) {
        return Err(Error::Unsupported(format!(
            "closed-form Gibbs posterior needs quadratic_plain, got `{}`",
            gp.loss.name()
        )));
    }
    if gp.lambda == 0.0 {
        return Ok(gp.prior.clone());
    }
    let d = gp.dim();
    let a = gp.coef() * gp.loss.scale();
    let precision = symmetrize(&(DMatrix::identity(d, d) * a + &gp.prior_precision));
    let rhs = &gp.data_mean * a + &gp.prior_precision * gp.prior.mean();
    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpd("posterior precision".into()))?;
    let mean = chol.solve(&rhs);
    let cov = symmetrize(&chol.inverse());
    GaussianMeasure::new(mean, cov)
}
