use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ivp::{integrate_geodesic, Trajectory, VariationSeed};
use crate::error::{Error, Result};
use crate::geometry::bounds::GammaBounds;
use crate::geometry::manifold::ManifoldModel;
use crate::geometry::metric::SplitMetric;
use crate::index::IndexData;
use crate::linalg::norm;
use crate::pathflow::path::DiscretePath;

/// Fixed endpoints z₀ = (x₀, y₀), z₁ = (x₁, y₁).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointPair {
    pub x0: Vec<f64>,
    pub y0: f64,
    pub x1: Vec<f64>,
    pub y1: f64,
}

impl EndpointPair {
    pub fn new(x0: Vec<f64>, y0: f64, x1: Vec<f64>, y1: f64) -> Self {
        EndpointPair { x0, y0, x1, y1 }
    }

    pub fn validate(&self, model: ManifoldModel, s0: f64) -> Result<()> {
        model.validate_point(&self.x0)?;
        model.validate_point(&self.x1)?;
        for y in [self.y0, self.y1] {
            if y.abs() >= s0 {
                return Err(Error::EndpointOutsideSlab { value: y.abs(), s0 });
            }
        }
        if self.x0 == self.x1 && self.y0 == self.y1 {
            return Err(Error::Usage("endpoints must be distinct".into()));
        }
        Ok(())
    }

    pub fn gap(&self) -> f64 {
        (self.y1 - self.y0).abs()
    }
}

/// Multi-start shooting parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpec {
    pub energy_cap: f64,
    /// Halton points per unknown; the total is this times (n + 1).
    pub halton_per_dim: usize,
    /// Regular grid points per axis added to the Halton seeds.
    pub grid_per_axis: usize,
    pub dedup_radius: f64,
    /// Endpoint residual required for acceptance.
    pub tolerance: f64,
    pub max_newton: usize,
    /// Overrides the velocity box (|ξ|_max, |η|_max) derived from the bounds.
    pub velocity_box: Option<(f64, f64)>,
    /// Interior nodes of the stored path samples.
    pub path_nodes: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            energy_cap: 30.0,
            halton_per_dim: 96,
            grid_per_axis: 3,
            dedup_radius: 1e-5,
            tolerance: 1e-10,
            max_newton: 50,
            velocity_box: None,
            path_nodes: 32,
        }
    }
}

/// A boundary-value geodesic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicRecord {
    pub id: usize,
    pub model: ManifoldModel,
    pub endpoints: EndpointPair,
    /// Initial velocity ξ₀ ∈ T_{x₀}X (ambient coordinates).
    pub xi: Vec<f64>,
    pub eta: f64,
    pub energy: f64,
    pub residual: f64,
    pub energy_drift: f64,
    /// Winding class in the universal cover (circle and torus only).
    pub winding: Option<Vec<i64>>,
    pub path: DiscretePath,
    pub index: Option<IndexData>,
    pub nondegenerate: Option<bool>,
}

/// Integration tolerance used for accepted records.
pub const RECORD_TOL: f64 = 1e-12;

impl GeodesicRecord {
    /// x₁ lifted to the winding class of the record.
    pub fn lifted_target(&self) -> Vec<f64> {
        lift(&self.endpoints.x1, self.winding.as_deref())
    }

    pub fn trajectory(&self, metric: &SplitMetric, seeds: &[VariationSeed]) -> Result<Trajectory> {
        integrate_geodesic(metric, &self.endpoints.x0, self.endpoints.y0, &self.xi, self.eta, seeds, RECORD_TOL)
    }

    /// Path sample with N interior nodes and exact endpoints.
    pub fn sample(&self, metric: &SplitMetric, n: usize) -> Result<DiscretePath> {
        let tr = self.trajectory(metric, &[])?;
        let x1 = self.lifted_target();
        Ok(tr.sample(n, Some((&self.endpoints.x0, self.endpoints.y0, &x1, self.endpoints.y1))))
    }

    /// Variational seeds for the n+1 shooting unknowns at x₀.
    pub fn shooting_seeds(&self) -> Vec<VariationSeed> {
        shooting_seeds(self.model, &self.endpoints.x0)
    }
}

fn lift(x1: &[f64], winding: Option<&[i64]>) -> Vec<f64> {
    match winding {
        Some(k) => x1.iter().zip(k).map(|(a, k)| a + 2.0 * PI * *k as f64).collect(),
        None => x1.to_vec(),
    }
}

/// Variational columns δv = eⱼ (tangent frame at x₀) and δw = 1.
pub fn shooting_seeds(model: ManifoldModel, x0: &[f64]) -> Vec<VariationSeed> {
    let m = model.ambient_dim();
    let mut seeds: Vec<VariationSeed> =
        model.tangent_frame(x0).into_iter().map(|e| VariationSeed { dv: e, dw: 0.0 }).collect();
    seeds.push(VariationSeed { dv: vec![0.0; m], dw: 1.0 });
    seeds
}

/// Radical-inverse Halton point `i` in `dim` dimensions, in [0, 1)^dim.
pub fn halton(i: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    (0..dim)
        .map(|d| {
            let b = PRIMES[d];
            let (mut f, mut r, mut k) = (1.0, 0.0, i);
            while k > 0 {
                f /= b as f64;
                r += f * (k % b) as f64;
                k /= b;
            }
            r
        })
        .collect()
}

/// Velocity box from the energy identity: |η| ≤ √(p₁c⁺ + q₁) and
/// |ξ| ≤ √((2c + β̄η²)/α̲).
pub fn velocity_box(bounds: &GammaBounds, cap: f64) -> (f64, f64) {
    let eta = (bounds.p1 * cap.max(0.0) + bounds.q1).sqrt();
    let xi = ((2.0 * cap + bounds.beta_hi * eta * eta) / bounds.alpha_lo).max(0.0).sqrt();
    (xi, eta)
}

struct Shooter<'a> {
    metric: &'a SplitMetric,
    ends: &'a EndpointPair,
    frame: Vec<Vec<f64>>,
    seeds: Vec<VariationSeed>,
    slab: f64,
    /// Newton iterates with a larger velocity are abandoned.
    speed_limit: f64,
}

struct Shot {
    u: Vec<f64>,
    traj: Trajectory,
    residual: DVector<f64>,
}

impl Shooter<'_> {
    fn velocity(&self, u: &[f64]) -> Vec<f64> {
        let m = self.metric.model.ambient_dim();
        let mut v = vec![0.0; m];
        for (j, e) in self.frame.iter().enumerate() {
            for i in 0..m {
                v[i] += u[j] * e[i];
            }
        }
        v
    }

    fn shoot(&self, u: &[f64], winding: Option<&[i64]>, tol: f64) -> Result<Shot> {
        self.shoot_with(u, winding, tol, true)
    }

    fn shoot_with(&self, u: &[f64], winding: Option<&[i64]>, tol: f64, columns: bool) -> Result<Shot> {
        let n = self.frame.len();
        if norm(u) > self.speed_limit || u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("shooting velocity left the search region".into()));
        }
        let traj = integrate_geodesic(
            self.metric,
            &self.ends.x0,
            self.ends.y0,
            &self.velocity(u),
            u[n],
            if columns { &self.seeds } else { &[] },
            tol,
        )?;
        let end = traj.end();
        let target = lift(&self.ends.x1, winding);
        let m = target.len();
        let mut r = DVector::zeros(m + 1);
        for i in 0..m {
            r[i] = end.x[i] - target[i];
        }
        r[m] = end.y - self.ends.y1;
        Ok(Shot { u: u.to_vec(), traj, residual: r })
    }

    fn exits_slab(&self, shot: &Shot) -> bool {
        shot.traj.y_extent(0).0 > self.slab
    }

    fn winding_of(&self, shot: &Shot) -> Option<Vec<i64>> {
        if !self.metric.model.is_flat() {
            return None;
        }
        let end = shot.traj.end();
        Some(end.x.iter().zip(&self.ends.x1).map(|(a, b)| ((a - b) / (2.0 * PI)).round() as i64).collect())
    }

    /// Damped Gauss–Newton on the endpoint map until the residual drops
    /// below `goal`, integrating at tolerance `tol`.
    fn newton(&self, mut shot: Shot, winding: Option<&[i64]>, tol: f64, goal: f64, iters: usize) -> Option<Shot> {
        // abandon the seed when the residual has not halved for a while
        let (mut best, mut since) = (f64::INFINITY, 0usize);
        for _ in 0..iters {
            let rn = shot.residual.norm();
            if rn <= goal {
                return Some(shot);
            }
            if rn < 0.5 * best {
                best = rn;
                since = 0;
            } else {
                since += 1;
                if since > 6 {
                    return None;
                }
            }
            let jac: DMatrix<f64> = shot.traj.variation_at(1.0);
            let svd = jac.svd(true, true);
            let smax = svd.singular_values.max();
            let step = svd.solve(&shot.residual, 1e-12 * smax.max(1e-300)).ok()?;
            let mut s = 1.0;
            let mut next = None;
            for _ in 0..12 {
                let u: Vec<f64> = shot.u.iter().zip(step.iter()).map(|(a, d)| a - s * d).collect();
                if let Ok(cand) = self.shoot_with(&u, winding, tol, false) {
                    if !self.exits_slab(&cand) && cand.residual.norm() <= (1.0 - 1e-4 * s) * rn {
                        next = Some(u);
                        break;
                    }
                }
                s *= 0.5;
            }
            shot = self.shoot(&next?, winding, tol).ok()?;
        }
        (shot.residual.norm() <= goal).then_some(shot)
    }

    /// Coarse solve from one seed: residual ≤ 1e-6 at integration tolerance 1e-8.
    fn coarse(&self, u0: &[f64], spec: &SearchSpec) -> Option<(Shot, Option<Vec<i64>>)> {
        let mut shot = self.shoot(u0, None, COARSE_TOL).ok()?;
        if self.exits_slab(&shot) {
            log::debug!("seed {u0:?} leaves the slab; discarded");
            return None;
        }
        let winding = self.winding_of(&shot);
        if winding.is_some() {
            shot = self.shoot(u0, winding.as_deref(), COARSE_TOL).ok()?;
        }
        match self.newton(shot, winding.as_deref(), COARSE_TOL, 1e-6, spec.max_newton) {
            Some(s) => Some((s, winding)),
            None => {
                log::debug!("seed {u0:?} did not converge");
                None
            }
        }
    }

    /// Polishes a coarse solution at the record tolerance.
    fn polish(&self, u: &[f64], winding: Option<&[i64]>, spec: &SearchSpec) -> Option<Shot> {
        let shot = self.shoot(u, winding, RECORD_TOL).ok()?;
        let s = self.newton(shot, winding, RECORD_TOL, 0.1 * spec.tolerance, spec.max_newton);
        if s.is_none() {
            // the fine integration may stall just above the goal
            let shot = self.newton(
                self.shoot(u, winding, RECORD_TOL).ok()?,
                winding,
                RECORD_TOL,
                spec.tolerance,
                spec.max_newton,
            );
            return shot.filter(|s| !self.exits_slab(s));
        }
        s.filter(|s| !self.exits_slab(s))
    }
}

const COARSE_TOL: f64 = 1e-8;

fn close(a: &[f64], b: &[f64], r: f64) -> bool {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt() < r
}

/// All geodesics from z₀ to z₁ with energy ≤ cap found by multi-start
/// shooting, sorted by energy.
pub fn solve_bvp(
    metric: &SplitMetric,
    ends: &EndpointPair,
    bounds: &GammaBounds,
    spec: &SearchSpec,
) -> Result<Vec<GeodesicRecord>> {
    let model = metric.model;
    ends.validate(model, bounds.s0)?;
    if !(spec.tolerance > 0.0 && spec.dedup_radius > 0.0) {
        return Err(Error::Usage("search tolerances must be positive".into()));
    }
    let n = model.dim();
    let (xi_max, eta_max) = spec.velocity_box.unwrap_or_else(|| {
        let (a, b) = velocity_box(bounds, spec.energy_cap);
        (1.05 * a + 1e-3, 1.05 * b + 1e-3)
    });
    let shooter = Shooter {
        metric,
        ends,
        frame: model.tangent_frame(&ends.x0),
        seeds: shooting_seeds(model, &ends.x0),
        slab: bounds.s0 + 1.0,
        speed_limit: 3.0 * (xi_max + eta_max) + 1.0,
    };
    let dim = n + 1;
    let scale: Vec<f64> = (0..dim).map(|j| if j < n { xi_max } else { eta_max }).collect();
    let mut seeds: Vec<Vec<f64>> = (1..=spec.halton_per_dim * dim)
        .map(|i| halton(i, dim).iter().zip(&scale).map(|(h, s)| (2.0 * h - 1.0) * s).collect())
        .collect();
    let g = spec.grid_per_axis;
    if g > 0 {
        let total = g.pow(dim as u32);
        for idx in 0..total {
            let mut rem = idx;
            let pt: Vec<f64> = (0..dim)
                .map(|j| {
                    let c = rem % g;
                    rem /= g;
                    let t = if g == 1 { 0.5 } else { c as f64 / (g - 1) as f64 };
                    (2.0 * t - 1.0) * scale[j]
                })
                .collect();
            seeds.push(pt);
        }
    }
    // seeds far above the cap rarely end below it
    let a0 = metric.coeffs(ends.y0);
    seeds.retain(|u| {
        let xx: f64 = u[..n].iter().map(|v| v * v).sum();
        0.5 * a0.a * xx - 0.5 * a0.b * u[n] * u[n] <= 2.0 * spec.energy_cap.max(0.0) + 1.0
    });
    let coarse: Vec<(Shot, Option<Vec<i64>>)> = seeds.par_iter().filter_map(|u| shooter.coarse(u, spec)).collect();
    let mut candidates: Vec<(Vec<f64>, Option<Vec<i64>>)> = Vec::new();
    for (shot, w) in coarse {
        // generous cap slack: polishing moves the energy only slightly
        if shot.traj.energy > spec.energy_cap + 1e-3 * (1.0 + spec.energy_cap.abs()) {
            continue;
        }
        if !candidates.iter().any(|(u, _)| close(u, &shot.u, 1e-4)) {
            candidates.push((shot.u, w));
        }
    }
    let polished: Vec<(Shot, Option<Vec<i64>>)> = candidates
        .par_iter()
        .filter_map(|(u, w)| shooter.polish(u, w.as_deref(), spec).map(|s| (s, w.clone())))
        .collect();
    let mut unique: Vec<(Shot, Option<Vec<i64>>)> = Vec::new();
    for (shot, w) in polished {
        if shot.traj.energy > spec.energy_cap {
            continue;
        }
        if !unique.iter().any(|(o, _)| close(&o.u, &shot.u, spec.dedup_radius)) {
            unique.push((shot, w));
        }
    }
    unique.sort_by(|a, b| {
        a.0.traj.energy.total_cmp(&b.0.traj.energy).then_with(|| {
            a.0.u
                .iter()
                .zip(&b.0.u)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let mut records = Vec::with_capacity(unique.len());
    for (id, (shot, winding)) in unique.into_iter().enumerate() {
        let xi = shooter.velocity(&shot.u);
        let eta = shot.u[n];
        let target = lift(&ends.x1, winding.as_deref());
        let path = shot.traj.sample(spec.path_nodes, Some((&ends.x0, ends.y0, &target, ends.y1)));
        records.push(GeodesicRecord {
            id,
            model,
            endpoints: ends.clone(),
            xi,
            eta,
            energy: shot.traj.energy,
            residual: shot.residual.norm(),
            energy_drift: shot.traj.drift,
            winding,
            path,
            index: None,
            nondegenerate: None,
        });
    }
    if records.is_empty() {
        log::warn!("no geodesics found below energy cap {} from {} seeds", spec.energy_cap, seeds.len());
    }
    Ok(records)
}

/// Record of the geodesic with initial data (x₀, y₀, ξ, η) on [0, 1]; the
/// endpoint is wherever it lands (flat models wrap it into [0, 2π)).
pub fn record_from_initial(
    metric: &SplitMetric,
    id: usize,
    x0: &[f64],
    y0: f64,
    xi: &[f64],
    eta: f64,
    path_nodes: usize,
) -> Result<GeodesicRecord> {
    let model = metric.model;
    model.validate_point(x0)?;
    let traj = integrate_geodesic(metric, x0, y0, xi, eta, &[], RECORD_TOL)?;
    let end = traj.end();
    let (x1, winding) = if model.is_flat() {
        let k: Vec<i64> = end.x.iter().map(|a| (a / (2.0 * PI)).floor() as i64).collect();
        let x1 = end.x.iter().zip(&k).map(|(a, k)| a - 2.0 * PI * *k as f64).collect();
        (x1, Some(k))
    } else {
        (end.x.clone(), None)
    };
    let endpoints = EndpointPair::new(x0.to_vec(), y0, x1, end.y);
    let target = lift(&endpoints.x1, winding.as_deref());
    let path = traj.sample(path_nodes, Some((x0, y0, &target, end.y)));
    Ok(GeodesicRecord {
        id,
        model,
        endpoints,
        xi: xi.to_vec(),
        eta,
        energy: traj.energy,
        residual: 0.0,
        energy_drift: traj.drift,
        winding,
        path,
        index: None,
        nondegenerate: None,
    })
}
