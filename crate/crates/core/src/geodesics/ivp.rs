use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::manifold::{normalize, ManifoldModel};
use crate::geometry::metric::SplitMetric;
use crate::linalg::dot;
use crate::ode::{integrate_with, DenseSolution, OdeOptions};
use crate::pathflow::path::DiscretePath;

/// Sphere nodes may leave the unit sphere by at most this much after
/// projection before the integration is declared broken.
pub const SPHERE_DRIFT_MAX: f64 = 1e-9;

/// Geodesic state at one time: position, velocity, height and its rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub y: f64,
    pub w: f64,
}

/// Initial perturbation (δv, δw) of one variational column; δx = δy = 0.
#[derive(Debug, Clone)]
pub struct VariationSeed {
    pub dv: Vec<f64>,
    pub dw: f64,
}

/// Solution of the geodesic equations on [0, t_end], optionally carrying
/// variational columns.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: ManifoldModel,
    pub sol: DenseSolution,
    pub columns: usize,
    /// Energy ½A|v|² − ½Bw² at t = 0.
    pub energy: f64,
    /// max |pointwise energy − energy| over accepted steps.
    pub drift: f64,
}

#[inline]
fn block(m: usize) -> usize {
    2 * m + 2
}

fn rhs(metric: &SplitMetric, m: usize, sphere: bool, cols: usize, s: &[f64], d: &mut [f64]) {
    let (x, rest) = s.split_at(m);
    let (v, rest) = rest.split_at(m);
    let (y, w) = (rest[0], rest[1]);
    let c = metric.coeffs(y);
    let vv = dot(v, v);
    let ra = c.a1 / c.a;
    let kappa = if sphere { vv } else { 0.0 };
    let nn = 0.5 * c.a1 * vv + 0.5 * c.b1 * w * w;
    for i in 0..m {
        d[i] = v[i];
        d[m + i] = -kappa * x[i] - ra * w * v[i];
    }
    d[2 * m] = w;
    d[2 * m + 1] = -nn / c.b;
    if cols == 0 {
        return;
    }
    // derivatives of the right-hand side for the variational equations
    let dra = (c.a2 * c.a - c.a1 * c.a1) / (c.a * c.a);
    let dw_dy = -(0.5 * c.a2 * vv + 0.5 * c.b2 * w * w) / c.b + nn * c.b1 / (c.b * c.b);
    let dw_dww = -c.b1 * w / c.b;
    let b = block(m);
    for j in 0..cols {
        let o = b * (j + 1);
        let (dx, dv) = (&s[o..o + m], &s[o + m..o + 2 * m]);
        let (dy, dwv) = (s[o + 2 * m], s[o + 2 * m + 1]);
        let vdv = dot(v, dv);
        for i in 0..m {
            d[o + i] = dv[i];
            let mut a = -ra * (dwv * v[i] + w * dv[i]) - dra * dy * w * v[i];
            if sphere {
                a -= 2.0 * vdv * x[i] + vv * dx[i];
            }
            d[o + m + i] = a;
        }
        d[o + 2 * m] = dwv;
        d[o + 2 * m + 1] = dw_dy * dy - (c.a1 / c.b) * vdv + dw_dww * dwv;
    }
}

fn project_sphere(m: usize, cols: usize, s: &mut [f64]) {
    let mut x = s[..m].to_vec();
    normalize(&mut x);
    s[..m].copy_from_slice(&x);
    let vx = dot(&s[m..2 * m], &x);
    for i in 0..m {
        s[m + i] -= vx * x[i];
    }
    let v = s[m..2 * m].to_vec();
    let b = block(m);
    for j in 0..cols {
        let o = b * (j + 1);
        let dxx = dot(&s[o..o + m], &x);
        for i in 0..m {
            s[o + i] -= dxx * x[i];
        }
        let c = dot(&s[o + m..o + 2 * m], &x) + dot(&v, &s[o..o + m]);
        for i in 0..m {
            s[o + m + i] -= c * x[i];
        }
    }
}

pub fn pointwise_energy(metric: &SplitMetric, s: &[f64], m: usize) -> f64 {
    let c = metric.coeffs(s[2 * m]);
    let w = s[2 * m + 1];
    0.5 * c.a * dot(&s[m..2 * m], &s[m..2 * m]) - 0.5 * c.b * w * w
}

fn ode_options(tol: f64) -> OdeOptions {
    OdeOptions { rtol: tol, atol: tol, h_init: 1e-2, max_steps: 50_000, ..OdeOptions::default() }
}

/// Integrates the geodesic equations from (x0, y0) with initial velocity
/// (v0, w0) on [0, 1], carrying the given variational columns.
pub fn integrate_geodesic(
    metric: &SplitMetric,
    x0: &[f64],
    y0: f64,
    v0: &[f64],
    w0: f64,
    seeds: &[VariationSeed],
    tol: f64,
) -> Result<Trajectory> {
    integrate_geodesic_span(metric, x0, y0, v0, w0, seeds, 1.0, tol)
}

#[allow(clippy::too_many_arguments)]
pub fn integrate_geodesic_span(
    metric: &SplitMetric,
    x0: &[f64],
    y0: f64,
    v0: &[f64],
    w0: f64,
    seeds: &[VariationSeed],
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("integration tolerance must be positive, got {tol}")));
    }
    let model = metric.model;
    let m = model.ambient_dim();
    model.validate_point(x0)?;
    if v0.len() != m || seeds.iter().any(|s| s.dv.len() != m) {
        return Err(Error::Usage("velocity has wrong dimension".into()));
    }
    let sphere = !model.is_flat();
    if sphere && dot(x0, v0).abs() > 1e-10 * (1.0 + crate::linalg::norm(v0)) {
        return Err(Error::Domain("initial velocity is not tangent to the sphere".into()));
    }
    let cols = seeds.len();
    let b = block(m);
    let mut s0 = vec![0.0; b * (cols + 1)];
    s0[..m].copy_from_slice(x0);
    s0[m..2 * m].copy_from_slice(v0);
    s0[2 * m] = y0;
    s0[2 * m + 1] = w0;
    for (j, sd) in seeds.iter().enumerate() {
        let o = b * (j + 1);
        s0[o + m..o + 2 * m].copy_from_slice(&sd.dv);
        s0[o + 2 * m + 1] = sd.dw;
    }
    if sphere {
        project_sphere(m, cols, &mut s0);
    }
    let energy = pointwise_energy(metric, &s0, m);
    let mut broken = 0.0f64;
    let sol = integrate_with(
        |_t, s, d| rhs(metric, m, sphere, cols, s, d),
        |s| {
            if sphere {
                project_sphere(m, cols, s);
                broken = broken.max((dot(&s[..m], &s[..m]).sqrt() - 1.0).abs());
            }
        },
        |_, _| true,
        0.0,
        t_end,
        &s0,
        &ode_options(tol),
    )?;
    if broken > SPHERE_DRIFT_MAX {
        return Err(Error::Integration(format!("sphere constraint violated by {broken:e} after projection")));
    }
    let drift = sol.y.iter().map(|s| (pointwise_energy(metric, s, m) - energy).abs()).fold(0.0, f64::max);
    Ok(Trajectory { model, sol, columns: cols, energy, drift })
}

/// Plain initial-value problem on [0, 1] without variational columns.
pub fn integrate_ivp(metric: &SplitMetric, x0: &[f64], y0: f64, v0: &[f64], w0: f64, tol: f64) -> Result<Trajectory> {
    integrate_geodesic(metric, x0, y0, v0, w0, &[], tol)
}

impl Trajectory {
    fn m(&self) -> usize {
        self.model.ambient_dim()
    }

    pub fn state_at(&self, t: f64) -> GeodesicState {
        let m = self.m();
        let s = self.sol.at(t);
        let mut x = s[..m].to_vec();
        if !self.model.is_flat() {
            normalize(&mut x);
        }
        GeodesicState { x, v: s[m..2 * m].to_vec(), y: s[2 * m], w: s[2 * m + 1] }
    }

    pub fn end(&self) -> GeodesicState {
        self.state_at(self.sol.t_end())
    }

    /// (δx; δy) of every variational column at t, as an (m+1) × columns matrix.
    pub fn variation_at(&self, t: f64) -> DMatrix<f64> {
        let m = self.m();
        let s = self.sol.at(t);
        let b = block(m);
        DMatrix::from_fn(m + 1, self.columns, |i, j| {
            let o = b * (j + 1);
            if i < m {
                s[o + i]
            } else {
                s[o + 2 * m]
            }
        })
    }

    /// (δv; δw) of every variational column at t.
    pub fn variation_rate_at(&self, t: f64) -> DMatrix<f64> {
        let m = self.m();
        let s = self.sol.at(t);
        let b = block(m);
        DMatrix::from_fn(m + 1, self.columns, |i, j| {
            let o = b * (j + 1);
            if i < m {
                s[o + m + i]
            } else {
                s[o + 2 * m + 1]
            }
        })
    }

    /// Samples the trajectory at t_k = k/(N+1); `endpoints` replaces the
    /// first and last nodes (useful for boundary-value solutions).
    pub fn sample(&self, n: usize, endpoints: Option<(&[f64], f64, &[f64], f64)>) -> DiscretePath {
        let mut xs = Vec::with_capacity(n + 2);
        let mut ys = Vec::with_capacity(n + 2);
        for k in 0..=n + 1 {
            let st = self.state_at(k as f64 / (n + 1) as f64);
            xs.push(st.x);
            ys.push(st.y);
        }
        if let Some((x0, y0, x1, y1)) = endpoints {
            xs[0] = x0.to_vec();
            ys[0] = y0;
            xs[n + 1] = x1.to_vec();
            ys[n + 1] = y1;
        }
        DiscretePath { model: self.model, x: xs, y: ys }
    }

    /// Max |y| and max |y′|² over the step points and a uniform grid.
    pub fn y_extent(&self, grid: usize) -> (f64, f64) {
        let m = self.m();
        let mut ymax = 0.0f64;
        let mut wmax = 0.0f64;
        let mut see = |s: &[f64]| {
            ymax = ymax.max(s[2 * m].abs());
            wmax = wmax.max(s[2 * m + 1] * s[2 * m + 1]);
        };
        for s in &self.sol.y {
            see(s);
        }
        let t_end = self.sol.t_end();
        for i in 1..grid {
            see(&self.sol.at(t_end * i as f64 / grid as f64));
        }
        (ymax, wmax)
    }

    /// ∫₀¹ |y′|² dt by composite Simpson on the dense output.
    pub fn y_dirichlet(&self, intervals: usize) -> f64 {
        let m = self.m();
        let n = intervals + intervals % 2;
        let t_end = self.sol.t_end();
        let h = t_end / n as f64;
        let mut s = 0.0;
        for i in 0..=n {
            let w = self.sol.at(h * i as f64)[2 * m + 1];
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += c * w * w;
        }
        s * h / 3.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::MetricFormula;
    use approx::assert_relative_eq;

    #[test]
    fn flat_cylinder_is_straight() {
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let tr = integrate_ivp(&m, &[0.0], 0.0, &[1.0], 0.5, 1e-12).unwrap();
        assert_relative_eq!(tr.energy, 0.375, epsilon = 1e-15);
        for t in [0.1, 0.5, 0.77, 1.0] {
            let s = tr.state_at(t);
            assert_relative_eq!(s.x[0], t, epsilon = 1e-13);
            assert_relative_eq!(s.y, 0.5 * t, epsilon = 1e-13);
        }
        assert!(tr.drift <= 1e-12);
    }

    #[test]
    fn sphere_great_circle() {
        let m = SplitMetric::product(ManifoldModel::Sphere2, 1.0, 1.0);
        let tr = integrate_ivp(&m, &[1.0, 0.0, 0.0], 0.0, &[0.0, 1.0, 0.0], 0.0, 1e-12).unwrap();
        for i in 0..=20 {
            let t = i as f64 / 20.0;
            let s = tr.state_at(t);
            assert_relative_eq!(crate::linalg::norm(&s.x), 1.0, epsilon = 1e-12);
            assert_relative_eq!(s.x[0], t.cos(), epsilon = 1e-10);
            assert_relative_eq!(s.x[1], t.sin(), epsilon = 1e-10);
            assert!(s.x[2].abs() < 1e-12);
        }
    }

    #[test]
    fn cos_beta_step_halving() {
        let m = SplitMetric::from_formula(
            ManifoldModel::Circle,
            &MetricFormula::CosPerturbedBeta { alpha: 1.0, beta: 1.0, amp: 0.3, freq: 1.0 },
        );
        let coarse = integrate_ivp(&m, &[0.0], 0.0, &[1.0], 0.2, 1e-11).unwrap();
        let fine = integrate_ivp(&m, &[0.0], 0.0, &[1.0], 0.2, 1e-13).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            assert!((coarse.state_at(t).y - fine.state_at(t).y).abs() <= 1e-9);
        }
        assert!(fine.drift <= 1e-8);
    }

    #[test]
    fn variational_columns_match_finite_differences() {
        let m = SplitMetric::from_formula(
            ManifoldModel::Sphere2,
            &MetricFormula::GaussianBumpAlpha { alpha: 1.0, amp: 0.5, width: 1.0, beta: 1.0 },
        );
        let x0 = [1.0, 0.0, 0.0];
        let v0 = [0.0, 1.3, 0.4];
        let w0 = 0.3;
        let seeds = vec![
            VariationSeed { dv: vec![0.0, 1.0, 0.0], dw: 0.0 },
            VariationSeed { dv: vec![0.0, 0.0, 1.0], dw: 0.0 },
            VariationSeed { dv: vec![0.0, 0.0, 0.0], dw: 1.0 },
        ];
        let tr = integrate_geodesic(&m, &x0, 0.1, &v0, w0, &seeds, 1e-12).unwrap();
        let jac = tr.variation_at(1.0);
        let eps = 1e-6;
        for (j, sd) in seeds.iter().enumerate() {
            let vp: Vec<f64> = v0.iter().zip(&sd.dv).map(|(a, b)| a + eps * b).collect();
            let vm: Vec<f64> = v0.iter().zip(&sd.dv).map(|(a, b)| a - eps * b).collect();
            let p = integrate_ivp(&m, &x0, 0.1, &vp, w0 + eps * sd.dw, 1e-13).unwrap().end();
            let q = integrate_ivp(&m, &x0, 0.1, &vm, w0 - eps * sd.dw, 1e-13).unwrap().end();
            for i in 0..3 {
                assert_relative_eq!(jac[(i, j)], (p.x[i] - q.x[i]) / (2.0 * eps), epsilon = 1e-6);
            }
            assert_relative_eq!(jac[(3, j)], (p.y - q.y) / (2.0 * eps), epsilon = 1e-6);
        }
    }

    #[test]
    fn non_tangent_velocity_rejected() {
        let m = SplitMetric::product(ManifoldModel::Sphere2, 1.0, 1.0);
        assert!(integrate_ivp(&m, &[1.0, 0.0, 0.0], 0.0, &[1.0, 0.0, 0.0], 0.0, 1e-12).is_err());
    }
}
