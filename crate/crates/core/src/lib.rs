//! Wasserstein PAC-Bayes toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: Gaussian measures on the Bures-Wasserstein space, closed-form
//!   W2 and KL, ball projections, Gaussian tail bounds and the `Rad` radius,
//!   and exact discrete optimal transport between sample clouds.
//! - [`loss`]: loss functions carrying certified Lipschitz/smoothness constants,
//!   synthetic data models and Monte Carlo risk/gap estimators.
//! - [`gibbs`]: the Gibbs potential, its derivatives, the closed-form quadratic
//!   posterior and an unadjusted Langevin sampler.
//! - [`bwsgd`]: Bures-Wasserstein SGD with mean projection and covariance
//!   clipping, plus its convergence guarantee.
//! - [`bounds`]: evaluators for the explicit generalisation bounds and
//!   thresholds, reported component by component.
//! - [`harness`]: reproducible Monte Carlo validation campaigns.

pub mod bounds;
pub mod bwsgd;
pub mod error;
pub mod geometry;
pub mod gibbs;
pub mod harness;
pub mod loss;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{CompactClass, GaussianMeasure, SampleCloud};
pub use rng::{aux_stream, rng_stream, RngStream};
