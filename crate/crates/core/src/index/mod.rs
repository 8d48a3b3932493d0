//! Relative Morse indices of geodesics by conjugate-point counting and by
//! the inertia of the discretised Hessian, plus endpoint certification.

pub mod certify;
pub mod hessian;
pub mod jacobi;

pub use certify::{certify_nonconjugate, index_record, index_records, Certificate, DEFAULT_MESH, MAX_MESH};
pub use hessian::{normalized_spectrum, refine_critical, relative_index_disc};
pub use jacobi::{endpoint_determinant, jacobi_conjugate_count, ConjugatePoint, JacobiCount};

use serde::{Deserialize, Serialize};

/// Index data attached to a geodesic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexData {
    /// Signed conjugate-point count; absent when the count failed.
    pub i_con: Option<i64>,
    pub conjugate_times: Vec<f64>,
    /// n⁻(discrete Hessian) − N; absent when every mesh was degenerate.
    pub i_disc: Option<i64>,
    pub mesh: usize,
    /// i_disc at mesh 2N.
    pub i_disc_refined: Option<i64>,
    pub agreement: bool,
    pub nondegenerate: bool,
    /// False when conjugate points cluster and the count is not trusted.
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}
