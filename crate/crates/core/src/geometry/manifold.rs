use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Base manifold X of the split spacetime X × ℝ.
///
/// Circle and torus use unwrapped universal-cover coordinates (one angle per
/// factor); the sphere uses unit vectors in ℝ³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldModel {
    Circle,
    #[serde(alias = "torus2", alias = "flat-torus-2")]
    Torus2,
    #[serde(alias = "sphere2", alias = "round-sphere-2")]
    Sphere2,
}

pub const SPHERE_TOL: f64 = 1e-12;

impl std::str::FromStr for ManifoldModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "circle" | "s1" => Ok(ManifoldModel::Circle),
            "torus2" | "torus-2" | "flat-torus-2" | "t2" => Ok(ManifoldModel::Torus2),
            "sphere2" | "sphere-2" | "round-sphere-2" | "s2" => Ok(ManifoldModel::Sphere2),
            _ => Err(Error::Usage(format!("unknown manifold {s:?} (circle, torus2 or sphere2)"))),
        }
    }
}

impl ManifoldModel {
    /// Intrinsic dimension n.
    pub fn dim(self) -> usize {
        match self {
            ManifoldModel::Circle => 1,
            ManifoldModel::Torus2 | ManifoldModel::Sphere2 => 2,
        }
    }

    /// Length of the coordinate vector used to store a point.
    pub fn ambient_dim(self) -> usize {
        match self {
            ManifoldModel::Circle => 1,
            ManifoldModel::Torus2 => 2,
            ManifoldModel::Sphere2 => 3,
        }
    }

    pub fn is_flat(self) -> bool {
        !matches!(self, ManifoldModel::Sphere2)
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldModel::Circle => "circle",
            ManifoldModel::Torus2 => "torus2",
            ManifoldModel::Sphere2 => "sphere2",
        }
    }

    pub fn validate_point(self, x: &[f64]) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::Domain(format!(
                "{} point needs {} coordinates, got {}",
                self.name(),
                self.ambient_dim(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coordinate".into()));
        }
        if self == ManifoldModel::Sphere2 {
            let r = norm(x);
            if (r - 1.0).abs() > SPHERE_TOL {
                return Err(Error::Domain(format!("sphere point has norm {r}, expected 1")));
            }
        }
        Ok(())
    }

    /// Orthonormal basis (as `n` ambient vectors) of the tangent space at x.
    pub fn tangent_frame(self, x: &[f64]) -> Vec<Vec<f64>> {
        match self {
            ManifoldModel::Circle => vec![vec![1.0]],
            ManifoldModel::Torus2 => vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            ManifoldModel::Sphere2 => sphere_frame(x),
        }
    }

    /// Orthogonal projection of an ambient vector onto T_x X.
    pub fn project_tangent(self, x: &[f64], v: &mut [f64]) {
        if self == ManifoldModel::Sphere2 {
            let s = dot(x, v);
            for i in 0..3 {
                v[i] -= s * x[i];
            }
        }
    }

    /// Retraction: moves x along the tangent vector v and returns to X.
    pub fn retract(self, x: &mut [f64], v: &[f64]) {
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi += vi;
        }
        if self == ManifoldModel::Sphere2 {
            normalize(x);
        }
    }

    /// Riemannian distance between two points (universal cover for flat models).
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            ManifoldModel::Sphere2 => dot(a, b).clamp(-1.0, 1.0).acos(),
            _ => a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt(),
        }
    }
}

pub fn normalize(x: &mut [f64]) {
    let r = norm(x);
    for v in x.iter_mut() {
        *v /= r;
    }
}

pub fn cross(a: &[f64], b: &[f64]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// A right-handed orthonormal frame (e1, e2) with e1 × e2 = x.
fn sphere_frame(x: &[f64]) -> Vec<Vec<f64>> {
    // pick the coordinate axis least aligned with x
    let mut axis = [0.0; 3];
    let i = (0..3).min_by(|&a, &b| x[a].abs().partial_cmp(&x[b].abs()).unwrap()).unwrap();
    axis[i] = 1.0;
    let mut e1 = cross(&axis, x).to_vec();
    normalize(&mut e1);
    let e2 = cross(x, &e1).to_vec();
    vec![e1, e2]
}
