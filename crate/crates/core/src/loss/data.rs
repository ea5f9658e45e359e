use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::SampleCloud;
use crate::{Error, Result};

/// Synthetic data distributions `mu` producing i.i.d. points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataModel {
    /// `z ~ N(mean, std^2 I)`.
    Gaussian { mean: Vec<f64>, std: f64 },
    /// Labelled points `z = (x, y)`: `x` uniform in the ball of radius
    /// `x_bound`, `y = sign <w_star, x>` flipped with probability `label_noise`.
    LabeledBall {
        w_star: Vec<f64>,
        x_bound: f64,
        #[serde(default)]
        label_noise: f64,
    },
}

impl DataModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            DataModel::Gaussian { mean, std } => {
                if mean.is_empty() || mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("gaussian data: mean must be non-empty and finite"));
                }
                if !(std.is_finite() && *std >= 0.0) {
                    return Err(Error::invalid(format!("gaussian data: std must be >= 0, got {std}")));
                }
            }
            DataModel::LabeledBall {
                w_star,
                x_bound,
                label_noise,
            } => {
                if w_star.is_empty() || w_star.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("labeled_ball data: w_star must be non-empty and finite"));
                }
                if !(x_bound.is_finite() && *x_bound > 0.0) {
                    return Err(Error::invalid("labeled_ball data: x_bound must be positive"));
                }
                if !(0.0..=1.0).contains(label_noise) {
                    return Err(Error::invalid("labeled_ball data: label_noise must lie in [0, 1]"));
                }
            }
        }
        Ok(())
    }

    /// Length of each sampled point.
    pub fn z_dim(&self) -> usize {
        match self {
            DataModel::Gaussian { mean, .. } => mean.len(),
            DataModel::LabeledBall { w_star, .. } => w_star.len() + 1,
        }
    }

    pub fn description(&self) -> String {
        match self {
            DataModel::Gaussian { mean, std } => {
                format!("gaussian: N(mean, {std}^2 I) in dimension {}", mean.len())
            }
            DataModel::LabeledBall {
                w_star,
                x_bound,
                label_noise,
            } => format!(
                "labeled_ball: x uniform in B(0, {x_bound}) in dimension {}, label noise {label_noise}",
                w_star.len()
            ),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        match self {
            DataModel::Gaussian { mean, std } => DVector::from_iterator(
                mean.len(),
                mean.iter().map(|m| {
                    let g: f64 = StandardNormal.sample(rng);
                    m + std * g
                }),
            ),
            DataModel::LabeledBall {
                w_star,
                x_bound,
                label_noise,
            } => {
                let d = w_star.len();
                let g = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
                // uniform in the ball: uniform direction, radius with density r^(d-1)
                let u: f64 = rng.random();
                let r = x_bound * u.powf(1.0 / d as f64);
                let norm = g.norm();
                let x = if norm > 0.0 { g * (r / norm) } else { g };
                let margin: f64 = x.iter().zip(w_star).map(|(a, b)| a * b).sum();
                let mut y = if margin >= 0.0 { 1.0 } else { -1.0 };
                if *label_noise > 0.0 && rng.random_bool(*label_noise) {
                    y = -y;
                }
                DVector::from_iterator(d + 1, x.iter().copied().chain(std::iter::once(y)))
            }
        }
    }

    pub fn sample_dataset<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Dataset> {
        self.validate()?;
        Dataset::new((0..m).map(|_| self.sample(rng)).collect())
    }
}

/// A training sample `S = (z_1, ..., z_m)` with `m >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    cloud: SampleCloud,
}

impl Dataset {
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("dataset needs at least one point"));
        }
        Ok(Self {
            cloud: SampleCloud::new(points)?,
        })
    }

    pub fn from_cloud(cloud: SampleCloud) -> Self {
        Self { cloud }
    }

    pub fn as_cloud(&self) -> &SampleCloud {
        &self.cloud
    }

    pub fn points(&self) -> &[DVector<f64>] {
        self.cloud.points()
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn z_dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.cloud.write_csv(out)
    }

    pub fn read_csv<R: std::io::BufRead>(input: R) -> Result<Self> {
        Ok(Self::from_cloud(SampleCloud::read_csv(input)?))
    }
}
