use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::bvp::GeodesicRecord;
use crate::geodesics::ivp::Trajectory;
use crate::geometry::metric::SplitMetric;
use crate::linalg::golden_min;

/// Scaled endpoint determinants below this are treated as conjugate.
pub const ENDPOINT_DET_MIN: f64 = 1e-6;
/// Singular values below this count towards a zero's multiplicity.
pub const KERNEL_TOL: f64 = 1e-8;
const BISECT_TOL: f64 = 1e-10;
const GRID: usize = 1000;
/// More than `CLUSTER_MAX` zeros inside a window of `CLUSTER_WIDTH`.
const CLUSTER_MAX: usize = 5;
const CLUSTER_WIDTH: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConjugatePoint {
    pub t: f64,
    pub multiplicity: usize,
    /// Signature of the crossing form on the kernel.
    pub signature: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiCount {
    pub count: i64,
    pub points: Vec<ConjugatePoint>,
    pub endpoint_det: f64,
    /// Zeros cluster and the count should not be trusted.
    pub accumulating: bool,
}

impl JacobiCount {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }
}

/// Jacobi fields vanishing at t = 0, one per shooting direction.
struct JacobiFields {
    traj: Trajectory,
    sphere: bool,
}

impl JacobiFields {
    fn new(metric: &SplitMetric, record: &GeodesicRecord) -> Result<Self> {
        let seeds = record.shooting_seeds();
        let traj = record.trajectory(metric, &seeds)?;
        Ok(JacobiFields { traj, sphere: !record.model.is_flat() })
    }

    /// Square endpoint matrix at t; on the sphere the position column
    /// completes the tangent columns to a basis of ℝ³ × ℝ.
    fn matrix(&self, t: f64) -> DMatrix<f64> {
        let j = self.traj.variation_at(t);
        if !self.sphere {
            return j;
        }
        let x = self.traj.state_at(t).x;
        let (r, c) = j.shape();
        let mut out = j.resize(r, c + 1, 0.0);
        for (i, xi) in x.iter().enumerate() {
            out[(i, c)] = *xi;
        }
        out
    }

    fn det(&self, t: f64) -> f64 {
        self.matrix(t).determinant()
    }

    fn sigma_min(&self, t: f64) -> f64 {
        let s = self.matrix(t).singular_values();
        s.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Crossing data at a zero: multiplicity and signature of
    /// Q(c) = A|δv·c|² − B(δw·c)² on the kernel.
    fn crossing(&self, metric: &SplitMetric, t: f64) -> (usize, i64) {
        let j = self.matrix(t);
        let cols = self.traj.columns;
        let svd = j.clone().svd(false, true);
        let vt = svd.v_t.expect("requested V");
        let smax = svd.singular_values.max().max(1.0);
        let kernel: Vec<usize> =
            (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] < KERNEL_TOL * smax).collect();
        let kernel = if kernel.is_empty() { vec![svd.singular_values.imin()] } else { kernel };
        let rate = self.traj.variation_rate_at(t);
        let m = rate.nrows() - 1;
        let co = metric.coeffs(self.traj.state_at(t).y);
        let k = kernel.len();
        let fields: Vec<(Vec<f64>, f64)> = kernel
            .iter()
            .map(|&r| {
                let c: Vec<f64> = (0..cols).map(|q| vt[(r, q)]).collect();
                let dv: Vec<f64> = (0..m).map(|i| (0..cols).map(|q| rate[(i, q)] * c[q]).sum()).collect();
                let dw: f64 = (0..cols).map(|q| rate[(m, q)] * c[q]).sum();
                (dv, dw)
            })
            .collect();
        let g = DMatrix::from_fn(k, k, |a, b| {
            let (va, wa) = &fields[a];
            let (vb, wb) = &fields[b];
            let vv: f64 = va.iter().zip(vb).map(|(p, q)| p * q).sum();
            co.a * vv - co.b * wa * wb
        });
        let eig = g.symmetric_eigen().eigenvalues;
        let scale = eig.amax().max(f64::MIN_POSITIVE);
        let sig = eig
            .iter()
            .map(|e| {
                if *e > 1e-12 * scale {
                    1
                } else if *e < -1e-12 * scale {
                    -1
                } else {
                    0
                }
            })
            .sum();
        (k, sig)
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    while b - a > BISECT_TOL {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// |det J(1)| divided by the product of max(1, column norm).
fn scaled_det(j: &DMatrix<f64>) -> f64 {
    let d = j.determinant().abs();
    let p: f64 = j.column_iter().map(|c| c.norm().max(1.0)).product();
    d / p
}

/// Scaled magnitude of the Jacobi endpoint determinant at t = 1.
pub fn endpoint_determinant(metric: &SplitMetric, record: &GeodesicRecord) -> Result<f64> {
    let f = JacobiFields::new(metric, record)?;
    Ok(scaled_det(&f.matrix(1.0)))
}

/// Conjugate points of γ(0) along γ in (0, 1), signed by the crossing form.
pub fn jacobi_conjugate_count(metric: &SplitMetric, record: &GeodesicRecord) -> Result<JacobiCount> {
    let f = JacobiFields::new(metric, record)?;
    let endpoint_det = scaled_det(&f.matrix(1.0));
    if endpoint_det < ENDPOINT_DET_MIN {
        return Err(Error::DegenerateEndpoint(format!(
            "record {}: scaled Jacobi determinant {endpoint_det:.3e} at t = 1",
            record.id
        )));
    }
    let ts: Vec<f64> = (1..GRID).map(|i| i as f64 / GRID as f64).collect();
    let dets: Vec<f64> = ts.iter().map(|&t| f.det(t)).collect();
    // normalise by t^{n+1} so that σ_min near t = 0 is comparable
    let sig: Vec<f64> = ts.iter().map(|&t| f.sigma_min(t) / t).collect();
    let mut zeros = Vec::new();
    for i in 0..ts.len() - 1 {
        if dets[i] == 0.0 {
            zeros.push(ts[i]);
        } else if dets[i] * dets[i + 1] < 0.0 {
            zeros.push(bisect(|t| f.det(t), ts[i], ts[i + 1]));
        }
    }
    // even-order touches leave the sign unchanged; look for dips of σ_min
    for i in 1..ts.len() - 1 {
        if sig[i] <= sig[i - 1] && sig[i] <= sig[i + 1] && dets[i - 1] * dets[i + 1] > 0.0 {
            let (tm, sm) = golden_min(|t| f.sigma_min(t), ts[i - 1], ts[i + 1], BISECT_TOL);
            if sm < KERNEL_TOL * f.matrix(tm).norm().max(1.0) {
                zeros.push(tm);
            }
        }
    }
    zeros.sort_by(f64::total_cmp);
    zeros.dedup_by(|a, b| (*a - *b).abs() < 10.0 * BISECT_TOL);
    let accumulating = zeros.windows(CLUSTER_MAX + 1).any(|w| w[CLUSTER_MAX] - w[0] < CLUSTER_WIDTH);
    let points: Vec<ConjugatePoint> = zeros
        .iter()
        .map(|&t| {
            let (multiplicity, signature) = f.crossing(metric, t);
            ConjugatePoint { t, multiplicity, signature }
        })
        .collect();
    let count = points.iter().map(|p| p.signature).sum();
    Ok(JacobiCount { count, points, endpoint_det, accumulating })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesics::bvp::record_from_initial;
    use crate::geometry::manifold::ManifoldModel;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn arc(len: f64) -> GeodesicRecord {
        let m = SplitMetric::product(ManifoldModel::Sphere2, 1.0, 1.0);
        record_from_initial(&m, 0, &[1.0, 0.0, 0.0], 0.1, &[0.0, len, 0.0], 0.05, 8).unwrap()
    }

    fn sphere() -> SplitMetric {
        SplitMetric::product(ManifoldModel::Sphere2, 1.0, 1.0)
    }

    #[test]
    fn flat_cylinder_has_none() {
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let r = record_from_initial(&m, 0, &[0.0], 0.0, &[PI / 2.0], 0.3, 8).unwrap();
        let j = jacobi_conjugate_count(&m, &r).unwrap();
        assert_eq!(j.count, 0);
        assert!(j.points.is_empty());
        assert_abs_diff_eq!(j.endpoint_det, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn sphere_arcs_count_crossings() {
        for (len, want) in [(1.3, vec![]), (4.0, vec![PI / 4.0]), (7.5, vec![PI / 7.5, 2.0 * PI / 7.5])] {
            let j = jacobi_conjugate_count(&sphere(), &arc(len)).unwrap();
            assert_eq!(j.count, want.len() as i64, "L = {len}");
            for (p, t) in j.points.iter().zip(&want) {
                assert_abs_diff_eq!(p.t, *t, epsilon = 1e-8);
                assert_eq!(p.multiplicity, 1);
                assert_eq!(p.signature, 1);
            }
            assert!(!j.accumulating);
        }
    }

    #[test]
    fn antipodal_arc_is_degenerate() {
        let r = arc(PI);
        assert!(endpoint_determinant(&sphere(), &r).unwrap() < ENDPOINT_DET_MIN);
        assert!(matches!(jacobi_conjugate_count(&sphere(), &r), Err(Error::DegenerateEndpoint(_))));
    }
}
