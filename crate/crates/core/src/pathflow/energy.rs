use nalgebra::{DMatrix, DVector};

use super::path::{DiscretePath, PathTangent, WMetric};
use crate::error::{Error, Result};
use crate::geometry::metric::SplitMetric;
use crate::linalg::dot;

/// Energy value with nodal partial derivatives in ambient coordinates.
#[derive(Debug, Clone)]
pub struct EnergyDiff {
    pub value: f64,
    pub gx: Vec<Vec<f64>>,
    pub gy: Vec<f64>,
}

struct Segment {
    u: Vec<f64>,
    s: f64,
    ybar: f64,
}

fn segment(path: &DiscretePath, k: usize) -> Segment {
    Segment {
        u: path.x[k + 1].iter().zip(&path.x[k]).map(|(a, b)| a - b).collect(),
        s: path.y[k + 1] - path.y[k],
        ybar: 0.5 * (path.y[k] + path.y[k + 1]),
    }
}

/// Midpoint-rule energy ½∫A|x′|² − ½∫(B + shift)|y′|² of the piecewise-linear
/// path.
pub fn energy(metric: &SplitMetric, path: &DiscretePath, shift: f64) -> f64 {
    let inv_h = 1.0 / path.h();
    let mut e = 0.0;
    for k in 0..path.y.len() - 1 {
        let sg = segment(path, k);
        let c = metric.coeffs(sg.ybar);
        e += 0.5 * inv_h * (c.a * dot(&sg.u, &sg.u) - (c.b + shift) * sg.s * sg.s);
    }
    e
}

/// ½∫|y′|² of the piecewise-linear path.
pub fn y_dirichlet(path: &DiscretePath) -> f64 {
    let inv_h = 1.0 / path.h();
    path.y.windows(2).map(|w| 0.5 * inv_h * (w[1] - w[0]).powi(2)).sum()
}

/// ∫|x′|² of the piecewise-linear path (chord differences).
pub fn x_dirichlet(path: &DiscretePath) -> f64 {
    let inv_h = 1.0 / path.h();
    path.x.windows(2).map(|w| inv_h * w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).sum()
}

pub fn energy_diff(metric: &SplitMetric, path: &DiscretePath, shift: f64) -> EnergyDiff {
    let m = path.model.ambient_dim();
    let len = path.y.len();
    let inv_h = 1.0 / path.h();
    let mut gx = vec![vec![0.0; m]; len];
    let mut gy = vec![0.0; len];
    let mut value = 0.0;
    for k in 0..len - 1 {
        let sg = segment(path, k);
        let c = metric.coeffs(sg.ybar);
        let bt = c.b + shift;
        let uu = dot(&sg.u, &sg.u);
        value += 0.5 * inv_h * (c.a * uu - bt * sg.s * sg.s);
        let e_s = -inv_h * bt * sg.s;
        let e_ybar = 0.5 * inv_h * (c.a1 * uu - c.b1 * sg.s * sg.s);
        for i in 0..m {
            let e_u = inv_h * c.a * sg.u[i];
            gx[k + 1][i] += e_u;
            gx[k][i] -= e_u;
        }
        gy[k + 1] += e_s + 0.5 * e_ybar;
        gy[k] += -e_s + 0.5 * e_ybar;
    }
    EnergyDiff { value, gx, gy }
}

/// Differential in frame coordinates (tangential part of the ambient
/// partials at interior nodes).
pub fn differential_coords(path: &DiscretePath, d: &EnergyDiff, frames: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let n = path.dim();
    let mut out = vec![0.0; path.coord_dim()];
    for k in 1..=path.interior() {
        for j in 0..n {
            out[path.coord_index(k, j)] = dot(&frames[k][j], &d.gx[k]);
        }
        out[path.coord_index(k, n)] = d.gy[k];
    }
    out
}

/// Energy, W-gradient and its norm at one path.
#[derive(Debug, Clone)]
pub struct GradientEval {
    pub value: f64,
    pub differential: Vec<f64>,
    pub coords: Vec<f64>,
    pub norm: f64,
}

pub fn gradient_eval(
    metric: &SplitMetric,
    path: &DiscretePath,
    shift: f64,
    w: &WMetric,
    frames: &[Vec<Vec<f64>>],
) -> GradientEval {
    let d = energy_diff(metric, path, shift);
    let differential = differential_coords(path, &d, frames);
    let coords = w.raise(&differential);
    let norm = dot(&coords, &differential).max(0.0).sqrt();
    GradientEval { value: d.value, differential, coords, norm }
}

/// Riesz representative of dE_{α,β+shift} with respect to the W inner product.
pub fn gradient(metric: &SplitMetric, path: &DiscretePath, shift: f64) -> Result<PathTangent> {
    let frames = path.frames();
    let w = WMetric::assemble(path, &frames).map_err(|e| Error::Numerical(format!("stiffness solve failed: {e}")))?;
    let g = gradient_eval(metric, path, shift, &w, &frames);
    Ok(path.from_coords(&g.coords, &frames))
}

/// Second variation in frame coordinates, including the curvature term of
/// the sphere retraction.
pub fn hessian(metric: &SplitMetric, path: &DiscretePath, shift: f64, frames: &[Vec<Vec<f64>>]) -> DMatrix<f64> {
    let m = path.model.ambient_dim();
    let n = path.dim();
    let nn = path.interior();
    let len = path.y.len();
    let inv_h = 1.0 / path.h();
    let dim = path.coord_dim();
    let mut hess = DMatrix::zeros(dim, dim);
    // local variables: x_k (m), x_{k+1} (m), y_k, y_{k+1}
    let nl = 2 * m + 2;
    let mut jac = DMatrix::zeros(m + 2, nl);
    for i in 0..m {
        jac[(i, i)] = -1.0;
        jac[(i, m + i)] = 1.0;
    }
    jac[(m, 2 * m)] = -1.0;
    jac[(m, 2 * m + 1)] = 1.0;
    jac[(m + 1, 2 * m)] = 0.5;
    jac[(m + 1, 2 * m + 1)] = 0.5;
    for k in 0..len - 1 {
        let sg = segment(path, k);
        let c = metric.coeffs(sg.ybar);
        let bt = c.b + shift;
        let uu = dot(&sg.u, &sg.u);
        let mut hz = DMatrix::zeros(m + 2, m + 2);
        for i in 0..m {
            hz[(i, i)] = inv_h * c.a;
            hz[(i, m + 1)] = inv_h * c.a1 * sg.u[i];
            hz[(m + 1, i)] = hz[(i, m + 1)];
        }
        hz[(m, m)] = -inv_h * bt;
        hz[(m, m + 1)] = -inv_h * c.b1 * sg.s;
        hz[(m + 1, m)] = hz[(m, m + 1)];
        hz[(m + 1, m + 1)] = 0.5 * inv_h * (c.a2 * uu - c.b2 * sg.s * sg.s);
        let hl = jac.transpose() * &hz * &jac;
        // local ambient index -> (node, Some(ambient component) | None for y)
        let local = |l: usize| -> (usize, Option<usize>) {
            if l < m {
                (k, Some(l))
            } else if l < 2 * m {
                (k + 1, Some(l - m))
            } else {
                (k + l - 2 * m, None)
            }
        };
        for a in 0..nl {
            let (na, ca) = local(a);
            if na == 0 || na > nn {
                continue;
            }
            for b in 0..nl {
                let (nb, cb) = local(b);
                if nb == 0 || nb > nn {
                    continue;
                }
                let v = hl[(a, b)];
                if v == 0.0 {
                    continue;
                }
                // project ambient components onto frame coordinates
                let ra: Vec<(usize, f64)> = match ca {
                    Some(i) => (0..n).map(|j| (path.coord_index(na, j), frames[na][j][i])).collect(),
                    None => vec![(path.coord_index(na, n), 1.0)],
                };
                let rb: Vec<(usize, f64)> = match cb {
                    Some(i) => (0..n).map(|j| (path.coord_index(nb, j), frames[nb][j][i])).collect(),
                    None => vec![(path.coord_index(nb, n), 1.0)],
                };
                for &(r, wr) in &ra {
                    for &(cc, wc) in &rb {
                        hess[(r, cc)] += v * wr * wc;
                    }
                }
            }
        }
    }
    if !path.model.is_flat() {
        let d = energy_diff(metric, path, shift);
        for k in 1..=nn {
            let s = dot(&d.gx[k], &path.x[k]);
            for j in 0..n {
                let i = path.coord_index(k, j);
                hess[(i, i)] -= s;
            }
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Maximises the energy over the interior y nodes with x fixed (Newton on
/// the y block). Returns the relaxed path and the final y-gradient norm.
pub fn relax_y(metric: &SplitMetric, path: &DiscretePath, shift: f64, tol: f64) -> (DiscretePath, f64) {
    let nn = path.interior();
    let inv_h = 1.0 / path.h();
    let mut p = path.clone();
    let mut gnorm = f64::INFINITY;
    for _ in 0..30 {
        let d = energy_diff(metric, &p, shift);
        let g = DVector::from_iterator(nn, d.gy[1..=nn].iter().cloned());
        gnorm = g.amax();
        if gnorm <= tol {
            break;
        }
        let mut hyy = DMatrix::zeros(nn, nn);
        for k in 0..=nn {
            let sg = segment(&p, k);
            let c = metric.coeffs(sg.ybar);
            let bt = c.b + shift;
            let uu = dot(&sg.u, &sg.u);
            let e_ss = -inv_h * bt;
            let e_sy = -inv_h * c.b1 * sg.s;
            let e_yy = 0.5 * inv_h * (c.a2 * uu - c.b2 * sg.s * sg.s);
            // derivative operators: y_k -> (-1, 1/2), y_{k+1} -> (1, 1/2)
            let ends = [(k, -1.0), (k + 1, 1.0)];
            for &(na, ta) in &ends {
                for &(nb, tb) in &ends {
                    if na == 0 || na > nn || nb == 0 || nb > nn {
                        continue;
                    }
                    let v = ta * tb * e_ss + 0.5 * (ta + tb) * e_sy + 0.25 * e_yy;
                    hyy[(na - 1, nb - 1)] += v;
                }
            }
        }
        let Some(step) = hyy.lu().solve(&g) else {
            break;
        };
        let before = gnorm;
        let mut accepted = false;
        let mut s = 1.0;
        for _ in 0..20 {
            let mut q = p.clone();
            for k in 1..=nn {
                q.y[k] -= s * step[k - 1];
            }
            let dq = energy_diff(metric, &q, shift);
            let gq = dq.gy[1..=nn].iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if gq < before {
                p = q;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (p, gnorm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::ManifoldModel;
    use crate::geometry::metric::MetricFormula;
    use crate::geometry::profile::Profile;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn wiggle(path: &DiscretePath, rng: &mut ChaCha8Rng, amp: f64) -> DiscretePath {
        let mut t = PathTangent::zeros(path);
        for k in 1..=path.interior() {
            for v in t.xi[k].iter_mut() {
                *v = rng.gen_range(-amp..amp);
            }
            t.eta[k] = rng.gen_range(-amp..amp);
        }
        t.make_tangent(path);
        path.retract(&t, 1.0)
    }

    #[test]
    fn straight_flat_energy_is_exact() {
        let p = DiscretePath::straight(ManifoldModel::Circle, &[0.0], 0.0, &[PI / 2.0], 0.3, 16).unwrap();
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let e = energy(&m, &p, 0.0);
        assert_relative_eq!(e, ((PI / 2.0).powi(2) - 0.09) / 2.0, epsilon = 1e-14);
        assert_relative_eq!(e, 1.18871, epsilon = 1e-5);
        let lam = 0.7;
        assert_relative_eq!(e - energy(&m, &p, lam), 0.5 * lam * 0.09, epsilon = 1e-14);
        // reparameterisation raises the energy
        let mut q = p.clone();
        for k in 1..=16 {
            let t = k as f64 / 17.0;
            q.x[k][0] = PI / 2.0 * t * t;
        }
        assert!(energy(&m, &q, 0.0) > e);
    }

    // second differences of c -> E(R(x + T c))
    fn check_hessian(metric: &SplitMetric, path: &DiscretePath, shift: f64) {
        let frames = path.frames();
        let h = hessian(metric, path, shift, &frames);
        let eps = 1e-4;
        let dim = path.coord_dim();
        let e_at = |a: usize, sa: f64, b: usize, sb: f64| {
            let mut c = vec![0.0; dim];
            c[a] += sa * eps;
            c[b] += sb * eps;
            energy(metric, &path.retract(&path.from_coords(&c, &frames), 1.0), shift)
        };
        for a in 0..dim {
            for b in 0..=a {
                let fd = (e_at(a, 1.0, b, 1.0) - e_at(a, 1.0, b, -1.0) - e_at(a, -1.0, b, 1.0)
                    + e_at(a, -1.0, b, -1.0))
                    / (4.0 * eps * eps);
                assert_relative_eq!(h[(a, b)], fd, epsilon = 2e-5, max_relative = 1e-5);
                assert_eq!(h[(a, b)], h[(b, a)]);
            }
        }
    }

    #[test]
    fn hessian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = SplitMetric::from_formula(
            ManifoldModel::Circle,
            &MetricFormula::GaussianBumpAlpha { alpha: 1.0, amp: 0.5, width: 1.0, beta: 1.0 },
        );
        let p = DiscretePath::straight(ManifoldModel::Circle, &[0.0], -0.2, &[2.0], 0.4, 6).unwrap();
        check_hessian(&m, &wiggle(&p, &mut rng, 0.2), 0.3);
        let m = SplitMetric::new(
            ManifoldModel::Sphere2,
            Profile::Cosine { base: 1.2, amp: 0.2, freq: 1.3 },
            Profile::Gaussian { base: 1.0, amp: 0.3, width: 0.8 },
        );
        let p =
            DiscretePath::straight(ManifoldModel::Sphere2, &[1.0, 0.0, 0.0], 0.1, &[0.0, 0.6, 0.8], -0.3, 5).unwrap();
        check_hessian(&m, &wiggle(&p, &mut rng, 0.1), 0.0);
    }

    #[test]
    fn relaxation_straightens_y_for_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = SplitMetric::product(ManifoldModel::Torus2, 1.0, 2.0);
        let p = DiscretePath::straight(ManifoldModel::Torus2, &[0.0, 0.0], 0.0, &[1.0, 1.0], 0.5, 9).unwrap();
        let (q, g) = relax_y(&m, &wiggle(&p, &mut rng, 0.3), 0.0, 1e-13);
        assert!(g <= 1e-13);
        for k in 0..q.y.len() {
            assert_relative_eq!(q.y[k], p.y[k], epsilon = 1e-12);
        }
    }
}
