use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::manifold::{normalize, ManifoldModel};
use crate::linalg::{dot, BandedCholesky, BandedSpd};

/// Piecewise-linear path with N interior nodes on a uniform grid of [0, 1].
/// `x` and `y` include both fixed endpoints, so they hold N + 2 entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub model: ManifoldModel,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Tangent vector at a discrete path: ambient node vectors ξ (tangent to X)
/// and reals η, both zero at the endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTangent {
    pub xi: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
}

impl PathTangent {
    pub fn zeros(path: &DiscretePath) -> Self {
        let m = path.model.ambient_dim();
        PathTangent { xi: vec![vec![0.0; m]; path.y.len()], eta: vec![0.0; path.y.len()] }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn scaled(&self, s: f64) -> PathTangent {
        PathTangent {
            xi: self.xi.iter().map(|v| v.iter().map(|a| a * s).collect()).collect(),
            eta: self.eta.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &PathTangent) -> PathTangent {
        PathTangent {
            xi: self.xi.iter().zip(&other.xi).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect(),
            eta: self.eta.iter().zip(&other.eta).map(|(a, b)| a + b).collect(),
        }
    }

    /// Projects every ξ node onto the tangent space and zeroes the endpoints.
    pub fn make_tangent(&mut self, path: &DiscretePath) {
        let last = self.len() - 1;
        for k in 0..=last {
            if k == 0 || k == last {
                self.xi[k].iter_mut().for_each(|v| *v = 0.0);
                self.eta[k] = 0.0;
            } else {
                path.model.project_tangent(&path.x[k], &mut self.xi[k]);
            }
        }
    }
}

impl DiscretePath {
    pub fn new(model: ManifoldModel, x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::Usage(format!("path needs matching x/y node lists, got {} and {}", x.len(), y.len())));
        }
        for p in &x {
            model.validate_point(p)?;
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite y node".into()));
        }
        Ok(DiscretePath { model, x, y })
    }

    /// Straight segment in the universal cover (flat) or along the shortest
    /// great-circle arc (sphere), with y interpolated linearly.
    pub fn straight(model: ManifoldModel, x0: &[f64], y0: f64, x1: &[f64], y1: f64, n: usize) -> Result<Self> {
        model.validate_point(x0)?;
        model.validate_point(x1)?;
        let h = 1.0 / (n + 1) as f64;
        let mut xs = Vec::with_capacity(n + 2);
        let mut ys = Vec::with_capacity(n + 2);
        let theta = model.distance(x0, x1);
        if !model.is_flat() && (std::f64::consts::PI - theta) < 1e-9 {
            return Err(Error::Usage("no shortest arc between antipodal points".into()));
        }
        for k in 0..=n + 1 {
            let t = k as f64 * h;
            let p = if k == 0 {
                x0.to_vec()
            } else if k == n + 1 {
                x1.to_vec()
            } else if model.is_flat() {
                x0.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect()
            } else if theta < 1e-15 {
                x0.to_vec()
            } else {
                let (s0, s1) = (((1.0 - t) * theta).sin(), (t * theta).sin());
                let st = theta.sin();
                let mut p: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| (s0 * a + s1 * b) / st).collect();
                normalize(&mut p);
                p
            };
            xs.push(p);
            ys.push(y0 + t * (y1 - y0));
        }
        Ok(DiscretePath { model, x: xs, y: ys })
    }

    /// Number of interior nodes N.
    pub fn interior(&self) -> usize {
        self.y.len() - 2
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.y.len() - 1) as f64
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    /// Size of the intrinsic coordinate vector: N·(n + 1).
    pub fn coord_dim(&self) -> usize {
        self.interior() * (self.dim() + 1)
    }

    /// Index of coordinate j (0..n for x, n for y) at interior node k (1..=N).
    #[inline]
    pub fn coord_index(&self, k: usize, j: usize) -> usize {
        (k - 1) * (self.dim() + 1) + j
    }

    pub fn same_mesh(&self, other: &DiscretePath) -> bool {
        self.model == other.model && self.y.len() == other.y.len()
    }

    /// Orthonormal tangent frames at every node (index 0..N+1).
    pub fn frames(&self) -> Vec<Vec<Vec<f64>>> {
        self.x.iter().map(|p| self.model.tangent_frame(p)).collect()
    }

    /// Interior x nodes (ambient) followed by interior y nodes.
    pub fn to_flat(&self) -> Vec<f64> {
        let n = self.interior();
        let mut out = Vec::with_capacity(n * (self.model.ambient_dim() + 1));
        for k in 1..=n {
            out.extend_from_slice(&self.x[k]);
        }
        out.extend_from_slice(&self.y[1..=n]);
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat), keeping this path's endpoints.
    pub fn with_flat(&self, v: &[f64]) -> DiscretePath {
        let n = self.interior();
        let m = self.model.ambient_dim();
        let mut p = self.clone();
        for k in 1..=n {
            p.x[k].copy_from_slice(&v[(k - 1) * m..k * m]);
        }
        p.y[1..=n].copy_from_slice(&v[n * m..n * m + n]);
        p
    }

    pub fn tangent_to_flat(&self, t: &PathTangent) -> Vec<f64> {
        let n = self.interior();
        let mut out = Vec::with_capacity(n * (self.model.ambient_dim() + 1));
        for k in 1..=n {
            out.extend_from_slice(&t.xi[k]);
        }
        out.extend_from_slice(&t.eta[1..=n]);
        out
    }

    pub fn tangent_from_flat(&self, v: &[f64]) -> PathTangent {
        let n = self.interior();
        let m = self.model.ambient_dim();
        let mut t = PathTangent::zeros(self);
        for k in 1..=n {
            t.xi[k].copy_from_slice(&v[(k - 1) * m..k * m]);
        }
        t.eta[1..=n].copy_from_slice(&v[n * m..n * m + n]);
        t
    }

    /// Frame coordinates of a tangent vector.
    pub fn to_coords(&self, t: &PathTangent, frames: &[Vec<Vec<f64>>]) -> Vec<f64> {
        let n = self.dim();
        let mut c = vec![0.0; self.coord_dim()];
        for k in 1..=self.interior() {
            for j in 0..n {
                c[self.coord_index(k, j)] = dot(&frames[k][j], &t.xi[k]);
            }
            c[self.coord_index(k, n)] = t.eta[k];
        }
        c
    }

    pub fn from_coords(&self, c: &[f64], frames: &[Vec<Vec<f64>>]) -> PathTangent {
        let n = self.dim();
        let mut t = PathTangent::zeros(self);
        for k in 1..=self.interior() {
            for j in 0..n {
                let s = c[self.coord_index(k, j)];
                for (a, e) in t.xi[k].iter_mut().zip(&frames[k][j]) {
                    *a += s * e;
                }
            }
            t.eta[k] = c[self.coord_index(k, n)];
        }
        t
    }

    /// Moves every interior node along `s·t` and returns to X.
    pub fn retract(&self, t: &PathTangent, s: f64) -> DiscretePath {
        let mut p = self.clone();
        for k in 1..=self.interior() {
            let step: Vec<f64> = t.xi[k].iter().map(|v| v * s).collect();
            self.model.retract(&mut p.x[k], &step);
            p.y[k] += s * t.eta[k];
        }
        p
    }

    /// W-distance approximation ‖log(self → other)‖ using node differences
    /// projected to the tangent spaces of `self`.
    pub fn w_distance(&self, other: &DiscretePath) -> f64 {
        let mut d = PathTangent::zeros(self);
        for k in 1..=self.interior() {
            for (j, v) in d.xi[k].iter_mut().enumerate() {
                *v = other.x[k][j] - self.x[k][j];
            }
            self.model.project_tangent(&self.x[k], &mut d.xi[k]);
            d.eta[k] = other.y[k] - self.y[k];
        }
        w_inner_unchecked(self, &d, &d).max(0.0).sqrt()
    }

    /// Node-wise sup distance on X and in y.
    pub fn sup_distance(&self, other: &DiscretePath) -> f64 {
        (0..self.y.len())
            .map(|k| self.model.distance(&self.x[k], &other.x[k]).max((self.y[k] - other.y[k]).abs()))
            .fold(0.0, f64::max)
    }

    /// Projection onto the tangent space at the normalised midpoint of
    /// segment k (identity on flat models).
    fn mid_projector(&self, k: usize) -> Option<Vec<f64>> {
        if self.model.is_flat() {
            return None;
        }
        let mut m: Vec<f64> = self.x[k].iter().zip(&self.x[k + 1]).map(|(a, b)| a + b).collect();
        normalize(&mut m);
        Some(m)
    }
}

fn project_mid(m: &Option<Vec<f64>>, v: &mut [f64]) {
    if let Some(m) = m {
        let s = dot(m, v);
        for (a, b) in v.iter_mut().zip(m) {
            *a -= s * b;
        }
    }
}

fn w_inner_unchecked(path: &DiscretePath, u: &PathTangent, v: &PathTangent) -> f64 {
    let inv_h = 1.0 / path.h();
    let mut s = 0.0;
    for k in 0..path.y.len() - 1 {
        let mid = path.mid_projector(k);
        let mut du: Vec<f64> = u.xi[k + 1].iter().zip(&u.xi[k]).map(|(a, b)| a - b).collect();
        let mut dv: Vec<f64> = v.xi[k + 1].iter().zip(&v.xi[k]).map(|(a, b)| a - b).collect();
        project_mid(&mid, &mut du);
        project_mid(&mid, &mut dv);
        s += inv_h * dot(&du, &dv);
        s += inv_h * (u.eta[k + 1] - u.eta[k]) * (v.eta[k + 1] - v.eta[k]);
    }
    s
}

/// Discrete W^{1,2} inner product: stiffness form in η and, in ξ, the same
/// form on differences projected to the segment midpoint tangent plane.
pub fn w_inner(path: &DiscretePath, u: &PathTangent, v: &PathTangent) -> Result<f64> {
    let len = path.y.len();
    if u.len() != len || v.len() != len || u.xi.iter().chain(&v.xi).any(|a| a.len() != path.model.ambient_dim()) {
        return Err(Error::Usage(format!("tangent mesh does not match path with {} nodes", len)));
    }
    Ok(w_inner_unchecked(path, u, v))
}

/// The W inner product as a band matrix in frame coordinates, factored.
#[derive(Debug, Clone)]
pub struct WMetric {
    pub matrix: BandedSpd,
    pub chol: BandedCholesky,
}

impl WMetric {
    pub fn assemble(path: &DiscretePath, frames: &[Vec<Vec<f64>>]) -> Result<WMetric> {
        let n = path.dim();
        let nn = path.interior();
        let inv_h = 1.0 / path.h();
        let mut w = BandedSpd::zeros(path.coord_dim(), 2 * (n + 1) - 1);
        for k in 0..=nn {
            let mid = path.mid_projector(k);
            // projected frame vectors at both ends of the segment
            let proj = |node: usize| -> Vec<Vec<f64>> {
                frames[node]
                    .iter()
                    .map(|e| {
                        let mut v = e.clone();
                        project_mid(&mid, &mut v);
                        v
                    })
                    .collect()
            };
            let ends: Vec<(usize, f64)> =
                [(k, -1.0), (k + 1, 1.0)].into_iter().filter(|&(node, _)| node >= 1 && node <= nn).collect();
            let projected: Vec<Vec<Vec<f64>>> = ends.iter().map(|&(node, _)| proj(node)).collect();
            // the band matrix stores each symmetric pair once, so keep r >= c
            for (a, &(na, sa)) in ends.iter().enumerate() {
                for (b, &(nb, sb)) in ends.iter().enumerate() {
                    for i in 0..=n {
                        for j in 0..=n {
                            let (r, c) = (path.coord_index(na, i), path.coord_index(nb, j));
                            if r < c || (i == n) != (j == n) {
                                continue;
                            }
                            let v = if i == n { 1.0 } else { dot(&projected[a][i], &projected[b][j]) };
                            w.add(r, c, inv_h * sa * sb * v);
                        }
                    }
                }
            }
        }
        let chol = w.cholesky()?;
        Ok(WMetric { matrix: w, chol })
    }

    /// Riesz representative: solves W·g = d.
    pub fn raise(&self, d: &[f64]) -> Vec<f64> {
        self.chol.solve(d)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.matrix.mul_vec(b))
    }
}
