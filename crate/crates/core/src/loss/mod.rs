//! Loss functions with certified geometric constants, synthetic data models
//! and Monte Carlo risk estimators.
//!
//! Predictors are vectors `h` in `R^d`. For the margin losses a data point is
//! `z = (x, y)` stored as one vector of length `d + 1` whose last entry is the
//! label `y` in `{-1, +1}`. For the quadratic losses `z` lives in `R^d`.

mod data;
mod risk;

pub use data::{DataModel, Dataset};
pub use risk::{
    empirical_risk, gap_estimate, quadratic_plain_gap, quadratic_plain_population_risk,
    GapEstimate,
};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::project_ball;
use crate::{Error, Result};

/// Named numeric parameters for [`builtin_loss`].
pub type LossParams = BTreeMap<String, f64>;

/// The concrete builtin families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum LossKind {
    /// `|c tanh(h) - proj_C(z)|^2` with `tanh` applied componentwise.
    QuadraticFeature { c: f64, c_psi: f64 },
    /// `sigmoid(-y <h, x>)` with `|x| <= x_bound`.
    BoundedSigmoidMargin { x_bound: f64 },
    /// `log(1 + exp(-y <h, x>))` with `|x| <= x_bound`.
    LogisticMargin { x_bound: f64 },
    /// `|h - z|^2 / 2`, optionally with `|z| <= data_radius`.
    QuadraticPlain { data_radius: Option<f64> },
}

/// A loss `l(h, z)` scaled by a positive factor, together with the constants
/// the bounds consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossModel {
    kind: LossKind,
    scale: f64,
}

/// Constants of a loss restricted to the ball of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveConstants {
    /// `D + L R` for a smooth loss.
    pub smooth_lipschitz: Option<f64>,
    /// `K` for a uniformly Lipschitz loss.
    pub uniform_lipschitz: Option<f64>,
    /// `D + 2 K R`, the range of a uniformly Lipschitz loss over the ball.
    pub range: Option<f64>,
}

impl EffectiveConstants {
    /// The tightest Lipschitz constant available on the ball.
    pub fn lipschitz(&self) -> f64 {
        match (self.smooth_lipschitz, self.uniform_lipschitz) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => f64::INFINITY,
        }
    }
}

fn required(params: &LossParams, name: &str, key: &str) -> Result<f64> {
    let v = *params
        .get(key)
        .ok_or_else(|| Error::invalid(format!("loss `{name}` requires parameter `{key}`")))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!(
            "loss `{name}`: parameter `{key}` must be positive and finite, got {v}"
        )));
    }
    Ok(v)
}

fn check_known(params: &LossParams, name: &str, known: &[&str]) -> Result<()> {
    match params.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Error::invalid(format!(
            "loss `{name}` has no parameter `{k}`"
        ))),
        None => Ok(()),
    }
}

/// Builds one of the builtin losses by name.
///
/// | name | parameters |
/// |---|---|
/// | `quadratic_feature` | `c`, `c_psi` |
/// | `bounded_sigmoid_margin` | `x_bound` |
/// | `logistic_margin` | `x_bound` |
/// | `quadratic_plain` | optional `data_radius` |
pub fn builtin_loss(name: &str, params: &LossParams) -> Result<LossModel> {
    let kind = match name {
        "quadratic_feature" => {
            check_known(params, name, &["c", "c_psi"])?;
            LossKind::QuadraticFeature {
                c: required(params, name, "c")?,
                c_psi: required(params, name, "c_psi")?,
            }
        }
        "bounded_sigmoid_margin" => {
            check_known(params, name, &["x_bound"])?;
            LossKind::BoundedSigmoidMargin {
                x_bound: required(params, name, "x_bound")?,
            }
        }
        "logistic_margin" => {
            check_known(params, name, &["x_bound"])?;
            LossKind::LogisticMargin {
                x_bound: required(params, name, "x_bound")?,
            }
        }
        "quadratic_plain" => {
            check_known(params, name, &["data_radius"])?;
            let data_radius = match params.get("data_radius") {
                None => None,
                Some(&r) if r.is_finite() && r >= 0.0 => Some(r),
                Some(&r) => {
                    return Err(Error::invalid(format!(
                        "loss `quadratic_plain`: data_radius must be >= 0, got {r}"
                    )))
                }
            };
            LossKind::QuadraticPlain { data_radius }
        }
        other => return Err(Error::invalid(format!("unknown loss `{other}`"))),
    };
    Ok(LossModel { kind, scale: 1.0 })
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

// max over u of |s'(u) (1 - 2 s(u))| where s is the sigmoid
const SIGMOID_CURVATURE: f64 = 0.096_225_044_864_937_6;

impl LossModel {
    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LossKind::QuadraticFeature { .. } => "quadratic_feature",
            LossKind::BoundedSigmoidMargin { .. } => "bounded_sigmoid_margin",
            LossKind::LogisticMargin { .. } => "logistic_margin",
            LossKind::QuadraticPlain { .. } => "quadratic_plain",
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The same loss multiplied by `factor > 0`. Every constant scales with it.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::invalid(format!(
                "loss scale must be positive, got {factor}"
            )));
        }
        Ok(Self {
            kind: self.kind,
            scale: self.scale * factor,
        })
    }

    /// Length of a data point for predictors in `R^d`.
    pub fn z_dim(&self, d: usize) -> usize {
        match self.kind {
            LossKind::BoundedSigmoidMargin { .. } | LossKind::LogisticMargin { .. } => d + 1,
            _ => d,
        }
    }

    pub fn check_dims(&self, h_dim: usize, z_dim: usize) -> Result<()> {
        let expected = self.z_dim(h_dim);
        if expected != z_dim {
            return Err(Error::DimensionMismatch {
                expected,
                found: z_dim,
            });
        }
        Ok(())
    }

    fn margin_parts<'a>(h: &DVector<f64>, z: &'a DVector<f64>) -> (f64, nalgebra::DVectorView<'a, f64>, f64) {
        let d = h.len();
        let x = z.rows(0, d);
        let y = z[d];
        (-y * h.dot(&x), x, y)
    }

    /// For margin losses `l = phi(u)` with `u = -y <h, x>`: the scaled
    /// `(phi'(u), phi''(u))`.
    pub fn margin_derivatives(&self, u: f64) -> Option<(f64, f64)> {
        let (d1, d2) = match self.kind {
            LossKind::BoundedSigmoidMargin { .. } => {
                let s = sigmoid(u);
                let ds = s * (1.0 - s);
                (ds, ds * (1.0 - 2.0 * s))
            }
            LossKind::LogisticMargin { .. } => {
                let s = sigmoid(u);
                (s, s * (1.0 - s))
            }
            _ => return None,
        };
        Some((self.scale * d1, self.scale * d2))
    }

    pub fn evaluate(&self, h: &DVector<f64>, z: &DVector<f64>) -> f64 {
        debug_assert_eq!(self.z_dim(h.len()), z.len());
        let raw = match self.kind {
            LossKind::QuadraticFeature { c, c_psi } => {
                let psi = project_ball(z, c_psi);
                h.iter()
                    .zip(psi.iter())
                    .map(|(hi, pi)| (c * hi.tanh() - pi).powi(2))
                    .sum()
            }
            LossKind::BoundedSigmoidMargin { .. } => sigmoid(Self::margin_parts(h, z).0),
            LossKind::LogisticMargin { .. } => softplus(Self::margin_parts(h, z).0),
            LossKind::QuadraticPlain { .. } => 0.5 * (h - z).norm_squared(),
        };
        self.scale * raw
    }

    pub fn gradient(&self, h: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(self.z_dim(h.len()), z.len());
        let raw = match self.kind {
            LossKind::QuadraticFeature { c, c_psi } => {
                let psi = project_ball(z, c_psi);
                DVector::from_iterator(
                    h.len(),
                    h.iter().zip(psi.iter()).map(|(hi, pi)| {
                        let t = hi.tanh();
                        2.0 * (c * t - pi) * c * (1.0 - t * t)
                    }),
                )
            }
            LossKind::BoundedSigmoidMargin { .. } => {
                let (u, x, y) = Self::margin_parts(h, z);
                let s = sigmoid(u);
                x * (-y * s * (1.0 - s))
            }
            LossKind::LogisticMargin { .. } => {
                let (u, x, y) = Self::margin_parts(h, z);
                x * (-y * sigmoid(u))
            }
            LossKind::QuadraticPlain { .. } => h - z,
        };
        raw * self.scale
    }

    pub fn hessian(&self, h: &DVector<f64>, z: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(self.z_dim(h.len()), z.len());
        let d = h.len();
        let raw = match self.kind {
            LossKind::QuadraticFeature { c, c_psi } => {
                let psi = project_ball(z, c_psi);
                DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    h.iter().zip(psi.iter()).map(|(hi, pi)| {
                        let t = hi.tanh();
                        let s = 1.0 - t * t;
                        2.0 * c * c * s * s - 4.0 * c * t * s * (c * t - pi)
                    }),
                ))
            }
            LossKind::BoundedSigmoidMargin { .. } => {
                let (u, x, y) = Self::margin_parts(h, z);
                let s = sigmoid(u);
                (x * x.transpose()) * (y * y * s * (1.0 - s) * (1.0 - 2.0 * s))
            }
            LossKind::LogisticMargin { .. } => {
                let (u, x, y) = Self::margin_parts(h, z);
                let s = sigmoid(u);
                (x * x.transpose()) * (y * y * s * (1.0 - s))
            }
            LossKind::QuadraticPlain { .. } => DMatrix::identity(d, d),
        };
        raw * self.scale
    }

    /// Uniform Lipschitz constant `K` in `h`, when one is certified.
    pub fn k(&self) -> Option<f64> {
        let raw = match self.kind {
            LossKind::BoundedSigmoidMargin { x_bound } => Some(x_bound / 4.0),
            LossKind::LogisticMargin { x_bound } => Some(x_bound),
            _ => None,
        };
        raw.map(|v| v * self.scale)
    }

    /// Gradient Lipschitz constant `L`.
    ///
    /// For `quadratic_feature` the diagonal Hessian entry is bounded by
    /// `2c^2 + 4c(c + C) |t|(1 - t^2)`, which is below `4c(c + C)`.
    pub fn l(&self) -> Option<f64> {
        let raw = match self.kind {
            LossKind::QuadraticFeature { c, c_psi } => Some(4.0 * c * (c + c_psi)),
            LossKind::BoundedSigmoidMargin { x_bound } => Some(SIGMOID_CURVATURE * x_bound * x_bound),
            LossKind::LogisticMargin { x_bound } => Some(x_bound * x_bound / 4.0),
            LossKind::QuadraticPlain { .. } => Some(1.0),
        };
        raw.map(|v| v * self.scale)
    }

    /// Bound on `sup_z |grad l(0, z)|`.
    pub fn d_grad(&self) -> Option<f64> {
        let raw = match self.kind {
            LossKind::QuadraticFeature { c, c_psi } => Some(2.0 * c * c_psi),
            LossKind::BoundedSigmoidMargin { x_bound } => Some(x_bound / 4.0),
            LossKind::LogisticMargin { x_bound } => Some(x_bound / 2.0),
            LossKind::QuadraticPlain { data_radius } => data_radius,
        };
        raw.map(|v| v * self.scale)
    }

    /// Bound on `sup_z |l(0, z)|`, written `D_l` for smooth unbounded losses.
    pub fn d_value(&self) -> Option<f64> {
        let raw = match self.kind {
            LossKind::QuadraticFeature { c_psi, .. } => Some(c_psi * c_psi),
            LossKind::BoundedSigmoidMargin { .. } => Some(0.5),
            LossKind::LogisticMargin { .. } => Some(std::f64::consts::LN_2),
            LossKind::QuadraticPlain { data_radius } => data_radius.map(|r| 0.5 * r * r),
        };
        raw.map(|v| v * self.scale)
    }

    /// `D` under the active assumption: the gradient bound when the loss is
    /// smooth and convex, the value bound otherwise.
    pub fn d(&self) -> Option<f64> {
        if self.is_smooth() {
            self.d_grad()
        } else if self.is_uniformly_lipschitz() {
            self.d_value()
        } else {
            None
        }
    }

    pub fn d_ell(&self) -> Option<f64> {
        self.d_value()
    }

    /// Uniformly `K`-Lipschitz with bounded values at the origin.
    pub fn is_uniformly_lipschitz(&self) -> bool {
        self.k().is_some() && self.d_value().is_some()
    }

    /// Convex, `L`-smooth, bounded gradients at the origin.
    ///
    /// `quadratic_feature` is convex only on the box of half-width
    /// [`LossModel::convex_box_halfwidth`]; the flag is granted for that region.
    pub fn is_smooth(&self) -> bool {
        match self.kind {
            LossKind::BoundedSigmoidMargin { .. } => false,
            LossKind::QuadraticPlain { data_radius } => data_radius.is_some(),
            _ => true,
        }
    }

    /// Values in `[0, 1]` for every `(h, z)`.
    pub fn bounded01(&self) -> bool {
        matches!(self.kind, LossKind::BoundedSigmoidMargin { .. }) && self.scale <= 1.0
    }

    /// Convex in `h` on all of `R^d`.
    pub fn is_globally_convex(&self) -> bool {
        matches!(
            self.kind,
            LossKind::LogisticMargin { .. } | LossKind::QuadraticPlain { .. }
        )
    }

    /// For `quadratic_feature`, the half-width `a` of the box `|h_i| <= a` on
    /// which the loss is convex for every data point.
    ///
    /// Convexity of a coordinate needs `c - 3c t^2 - 2C|t| >= 0` with `t = tanh h_i`.
    pub fn convex_box_halfwidth(&self) -> Option<f64> {
        match self.kind {
            LossKind::QuadraticFeature { c, c_psi } => {
                let t = (-c_psi + (c_psi * c_psi + 3.0 * c * c).sqrt()) / (3.0 * c);
                Some(t.atanh())
            }
            LossKind::QuadraticPlain { .. } | LossKind::LogisticMargin { .. } => Some(f64::INFINITY),
            LossKind::BoundedSigmoidMargin { .. } => None,
        }
    }
}

/// Constants of `loss` on the closed ball of radius `r`.
pub fn effective_lipschitz_on_ball(loss: &LossModel, r: f64) -> Result<EffectiveConstants> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    let a1 = loss.is_uniformly_lipschitz();
    let a2 = loss.is_smooth();
    if !a1 && !a2 {
        return Err(Error::Inapplicable {
            bound: "effective_lipschitz_on_ball".into(),
            reason: format!("loss `{}` satisfies neither A1 nor A2", loss.name()),
        });
    }
    let smooth_lipschitz = if a2 {
        Some(loss.d_grad().unwrap() + loss.l().unwrap() * r)
    } else {
        None
    };
    let (uniform_lipschitz, range) = if a1 {
        let k = loss.k().unwrap();
        (Some(k), Some(loss.d_value().unwrap() + 2.0 * k * r))
    } else {
        (None, None)
    };
    Ok(EffectiveConstants {
        smooth_lipschitz,
        uniform_lipschitz,
        range,
    })
}
