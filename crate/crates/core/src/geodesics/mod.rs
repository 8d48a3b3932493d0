//! Geodesic initial- and boundary-value problems and the a-priori bound
//! checks on their solutions.

pub mod ivp;

pub use ivp::{integrate_geodesic, integrate_ivp, GeodesicState, Trajectory, VariationSeed};
pub mod bvp;

pub use bvp::{record_from_initial, solve_bvp, EndpointPair, GeodesicRecord, SearchSpec};
pub mod stima;

pub use stima::{verify_stima, verify_stima2, BoundCheck, BoundReport};
