//! Numerical Morse complexes for geodesics between two fixed points of a
//! split Lorentzian manifold X × ℝ with metric α(x,y)dx² − β(x,y)dy².
//!
//! The pipeline enumerates connecting geodesics by shooting, computes their
//! relative Morse indices by conjugate-point counting and by the inertia of a
//! discretised Hessian, builds a bounded pseudo-gradient flow on a discretised
//! path space, counts connecting flow lines and computes integral homology,
//! which is compared with the homology of the based loop space of X.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod campaign;
pub mod complex;
pub mod config;
pub mod error;
pub mod geodesics;
pub mod geometry;
pub mod index;
pub mod linalg;
pub mod ode;
pub mod pathflow;
pub mod pipeline;

pub use campaign::{verify_bounds_campaign, CampaignReport};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use pipeline::{run_pipeline, Summary};
