//! Learning periodic manipulation skills from a single demonstration.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`rdmp`]: rhythmic dynamic movement primitives (fit, integrate, rescale)
//! - [`gp`]: Gaussian-process surrogate and the UCB acquisition value
//! - [`metrics`]: keypoint distance, period estimation and the performance score
//! - [`imagine`]: warm-start candidates stitched from robot play data
//! - [`bo`]: the warm-started Bayesian-optimization loop
//! - [`sim`]: seeded particle environments for wiping, winding and stirring
//! - [`baselines`]: direct imitation and model-based imitation
//! - [`harness`]: experiment configuration, orchestration and run logs

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bo;
pub mod error;
pub mod gp;
pub mod harness;
pub mod imagine;
pub mod keypoints;
pub mod metrics;
pub mod rdmp;
pub mod sim;
pub mod spline;
pub mod trajectory;

pub use error::{Error, Result};
pub use trajectory::{Trajectory, Vec3};
