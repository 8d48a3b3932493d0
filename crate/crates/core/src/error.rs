use thiserror::Error;

/// Errors raised across the library. Each variant maps onto one exit-code
/// class of the command line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("endpoint outside slab: |y| = {value} must be < s0 = {s0}")]
    EndpointOutsideSlab { value: f64, s0: f64 },

    #[error("integration error: {0}")]
    Integration(String),

    #[error("step size underflow at t = {t} (h = {h:e})")]
    Stiffness { t: f64, h: f64 },

    #[error("degenerate endpoint: {0}")]
    DegenerateEndpoint(String),

    #[error("degenerate hessian: eigenvalue {eigenvalue:e} at mesh N = {mesh}")]
    DegenerateHessian { eigenvalue: f64, mesh: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("integrity error: (d o d) nonzero in degree {degree} at row {row}, column {col}")]
    Integrity { degree: i32, row: usize, col: usize },

    #[error("unsupported manifold: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source} (completed artifacts: {})", .completed.join(", "))]
    Stage { stage: String, completed: Vec<String>, source: Box<Error> },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for usage and configuration problems, 3 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } => source.exit_code(),
            Error::Usage(_)
            | Error::Config(_)
            | Error::EndpointOutsideSlab { .. }
            | Error::Unsupported(_)
            | Error::Domain(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
