//! Discretised path space 𝓜 = 𝓧 × 𝓨 with its W^{1,2}-type metric, the
//! energy functionals and the bounded pseudo-gradient flow.

pub mod energy;
pub mod field;
pub mod flow;
pub mod hilvec;
pub mod interliv;
pub mod path;
pub mod selftest;

pub use energy::{energy, energy_diff, gradient, hessian, relax_y, x_dirichlet, y_dirichlet};
pub use field::{chi, pseudo_gradient_F, FieldEval, FlowConfig};
pub use flow::{
    flow, run_flow, trace_flow, FieldSample, FlowOptions, FlowOutcome, FlowRun, FlowSample, FlowSystem, PathSystem,
    Trace,
};
pub use hilvec::{hilvec_bound, HilvecValue};
pub use interliv::{interliv_bound, InterlivBounds};
pub use path::{w_inner, DiscretePath, PathTangent, WMetric};
pub use selftest::{hilvec_fuzz, lyapunov_suite, HilvecFuzz, LyapunovCase};
