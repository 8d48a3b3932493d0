use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesics::bvp::GeodesicRecord;
use crate::geometry::metric::SplitMetric;
use crate::pathflow::energy::{differential_coords, energy_diff, hessian};
use crate::pathflow::path::{DiscretePath, WMetric};

/// W-normalised Hessian eigenvalues closer to 0 than this are degenerate.
pub const EIGEN_TOL: f64 = 1e-8;
pub const MIN_MESH: usize = 8;

/// Newton iterations on the discrete energy, starting from the sampled
/// geodesic, until the W-dual norm of dE drops below `tol`.
pub fn refine_critical(metric: &SplitMetric, path: &DiscretePath, tol: f64) -> Result<DiscretePath> {
    let mut p = path.clone();
    for _ in 0..30 {
        let frames = p.frames();
        let d = differential_coords(&p, &energy_diff(metric, &p, 0.0), &frames);
        let w = WMetric::assemble(&p, &frames)?;
        let g = w.raise(&d);
        let norm = g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        if norm < tol {
            return Ok(p);
        }
        let h = hessian(metric, &p, 0.0, &frames);
        let step = h
            .lu()
            .solve(&DVector::from_vec(d))
            .ok_or_else(|| Error::Numerical("singular Hessian during refinement".into()))?;
        let t = p.from_coords(step.as_slice(), &frames);
        p = p.retract(&t, -1.0);
    }
    Ok(p)
}

/// Eigenvalues of the Hessian relative to W, ascending.
pub fn normalized_spectrum(metric: &SplitMetric, path: &DiscretePath) -> Result<Vec<f64>> {
    let frames = path.frames();
    let h = hessian(metric, path, 0.0, &frames);
    let w = WMetric::assemble(path, &frames)?.matrix.to_dense();
    let l = w.cholesky().ok_or_else(|| Error::Numerical("W is not positive definite".into()))?.l();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(h.nrows(), h.nrows()))
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let mut s = &linv * h * linv.transpose();
    s = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = s.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// n⁻ of the discrete second variation at the mesh-N critical point near γ,
/// minus the N directions of the y sector.
pub fn relative_index_disc(metric: &SplitMetric, record: &GeodesicRecord, n: usize) -> Result<i64> {
    if n < MIN_MESH {
        return Err(Error::Usage(format!("mesh N = {n} below {MIN_MESH}")));
    }
    let sampled = record.sample(metric, n)?;
    let path = refine_critical(metric, &sampled, 1e-11)?;
    let eig = normalized_spectrum(metric, &path)?;
    if let Some(e) = eig.iter().find(|e| e.abs() < EIGEN_TOL) {
        return Err(Error::DegenerateHessian { eigenvalue: *e, mesh: n });
    }
    let neg = eig.iter().filter(|e| **e < 0.0).count() as i64;
    Ok(neg - n as i64)
}
