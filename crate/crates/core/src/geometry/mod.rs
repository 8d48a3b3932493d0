//! Base manifolds, split Lorentzian metrics, the bound family Γ and the slab
//! cutoff.

pub mod bounds;
pub mod convexity;
pub mod manifold;
pub mod metric;
pub mod profile;

pub use bounds::{achieved_bounds, estimate_inputs, AchievedBounds, BoundInputs, GammaBounds, LAMBDA_MAX};
pub use convexity::{check_convexity, ConvexityReport, GridSpec};
pub use manifold::ManifoldModel;
pub use metric::{apply_slab_cutoff, BlendVariant, MetricFormula, MetricValues, PsiSpec, SplitMetric};
pub use profile::{Profile, Psi};
