//! Bures-Wasserstein space primitives.
//!
//! Gaussian measures and their W2/KL distances, the compact slices
//! `C_{alpha,beta,M}`, projections onto Euclidean balls together with the
//! Gaussian tail bounds they rely on, and exact discrete optimal transport
//! between equally sized sample clouds.

mod cloud;
mod compact;
mod gaussian;
pub mod linalg;
pub mod ot;

pub use cloud::SampleCloud;
pub use compact::{
    project_ball, rad_conditions, rad_radius, tail_mass_bound, truncated_moment_bounds,
    CompactClass, Membership,
};
pub use gaussian::{kl_gaussian, w2_gaussian, w2_squared_gaussian, GaussianMeasure};
pub use ot::{empirical_w1, empirical_w2, AssignmentSolver, GroundCost};
