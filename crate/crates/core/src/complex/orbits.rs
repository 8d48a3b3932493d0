use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::system::{CriticalPoint, MorseSystem};
use crate::error::{Error, Result};
use crate::linalg::{dot, nelder_mead, norm};
use crate::pathflow::flow::{run_flow, trace_flow, FlowOptions, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitSearch {
    /// Seed radius around the upper rest point, in W units.
    pub eps: f64,
    /// The matching level sits this fraction of the energy gap above the
    /// lower rest point.
    pub level_frac: f64,
    /// Crossings within this fraction of the distance from the lower rest
    /// point to its nearest fellow rest point count as near.
    pub near_frac: f64,
    /// Orbits whose mid-level crossings are closer than this fraction of
    /// the distance between the two rest points are identified.
    pub merge_frac: f64,
    pub circle_samples: usize,
    /// Seeds on Sᵏ for k ≥ 2 are this many times k².
    pub sphere_samples: usize,
    pub newton_iters: usize,
    pub fd_step: f64,
    /// Repeat the search at 0.7·eps and with jittered merge radii.
    pub stability_check: bool,
    pub seed: u64,
}

impl Default for OrbitSearch {
    fn default() -> Self {
        OrbitSearch {
            eps: 1e-3,
            level_frac: 1e-3,
            near_frac: 0.25,
            merge_frac: 1e-3,
            circle_samples: 72,
            sphere_samples: 64,
            newton_iters: 25,
            fd_step: 1e-5,
            stability_check: true,
            seed: 1,
        }
    }
}

/// One connecting flow line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Orbit {
    pub sign: i64,
    /// Seed direction on the unit sphere of the upper unstable chart.
    pub theta: Vec<f64>,
    /// State where the orbit crosses the mid level between the two energies.
    pub crossing: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairCensus {
    pub from: usize,
    pub to: usize,
    pub orbits: Vec<Orbit>,
    pub signed_count: i64,
    /// Some seed stalled at a rest point of index at least that of `from`.
    pub transversality_warning: bool,
    /// The count survived the eps and merge-radius perturbations.
    pub stable: bool,
    pub evaluations: usize,
}

struct SeedEval {
    phi: Vec<f64>,
    /// Distance to the lower rest point at the level crossing.
    dist: f64,
    near: bool,
    mid: Option<Vec<f64>>,
    at_level: Option<Vec<f64>>,
    stalled: Option<Vec<f64>>,
}

struct Pair<'a, S: MorseSystem> {
    sys: &'a S,
    z: &'a CriticalPoint,
    zp: &'a CriticalPoint,
    others: &'a [CriticalPoint],
    level: f64,
    mid: f64,
    near_r: f64,
    eps: f64,
    opts: FlowOptions,
}

fn crossing<S: MorseSystem>(sys: &S, tr: &Trace, level: f64) -> Option<Vec<f64>> {
    let i = tr.samples.iter().position(|s| s.e < level)?;
    let s_at = |t: f64| {
        let mut s = tr.sol.at(t);
        sys.project(&mut s);
        s
    };
    if i == 0 {
        return Some(s_at(0.0));
    }
    let (mut a, mut b) = (tr.samples[i - 1].t, tr.samples[i].t);
    for _ in 0..48 {
        let m = 0.5 * (a + b);
        if sys.energy(&s_at(m)) >= level {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-14 * (1.0 + b) {
            break;
        }
    }
    Some(s_at(b))
}

impl<S: MorseSystem> Pair<'_, S> {
    fn eval(&self, theta: &[f64]) -> Result<SeedEval> {
        let mut dir = vec![0.0; self.z.state.len()];
        for (t, f) in theta.iter().zip(&self.z.chart.frame) {
            for (d, v) in dir.iter_mut().zip(f) {
                *d += self.eps * t * v;
            }
        }
        let start = self.sys.displace(&self.z.state, &dir);
        let tr = trace_flow(self.sys, &start, &self.opts, Some(self.level))?;
        if !tr.reached_level {
            return Ok(SeedEval {
                phi: Vec::new(),
                dist: f64::INFINITY,
                near: false,
                mid: None,
                at_level: None,
                stalled: tr.converged.then(|| tr.sol.last().to_vec()),
            });
        }
        let mid = crossing(self.sys, &tr, self.mid);
        let x = crossing(self.sys, &tr, self.level).expect("level was reached");
        let dist = self.sys.distance(&x, &self.zp.state);
        let phi = self.zp.chart.coords(&self.sys.log(&self.zp.state, &x));
        Ok(SeedEval { phi, dist, near: dist <= self.near_r, mid, at_level: Some(x), stalled: None })
    }

    fn stall_is_suspicious(&self, s: &[f64]) -> bool {
        match self.others.iter().map(|c| (c, self.sys.distance(s, &c.state))).min_by(|a, b| a.1.total_cmp(&b.1)) {
            Some((c, d)) if d <= self.near_r => c.degree >= self.z.degree,
            _ => true,
        }
    }
}

fn circle_point(a: f64) -> Vec<f64> {
    vec![a.cos(), a.sin()]
}

/// Orthonormal basis of θ^⊥ with det[θ, T] > 0.
fn tangent_basis(theta: &[f64]) -> Vec<Vec<f64>> {
    let m = theta.len();
    let mut basis: Vec<Vec<f64>> = vec![theta.to_vec()];
    for e in 0..m {
        let mut v = vec![0.0; m];
        v[e] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        if basis.len() == m {
            break;
        }
    }
    let det = DMatrix::from_fn(m, m, |i, j| basis[j][i]).determinant();
    if det < 0.0 {
        basis[1].iter_mut().for_each(|x| *x = -*x);
    }
    basis.remove(0);
    basis
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn sphere_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen();
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    };
    (0..count).map(|_| unit((0..dim).map(|_| gauss()).collect())).collect()
}

struct Root {
    theta: Vec<f64>,
    sign: i64,
    mid: Vec<f64>,
}

impl<S: MorseSystem> Pair<'_, S> {
    fn roots_k0(&self, evals: &mut usize) -> Result<(Vec<Root>, bool)> {
        let mut roots = Vec::new();
        let mut warn = false;
        for sign in [1i64, -1] {
            let theta = vec![sign as f64];
            let e = self.eval(&theta)?;
            *evals += 1;
            if let Some(s) = &e.stalled {
                warn |= self.stall_is_suspicious(s);
            }
            if !e.near {
                continue;
            }
            let run =
                run_flow(self.sys, e.at_level.as_ref().unwrap(), &self.opts, std::slice::from_ref(&self.zp.state))?;
            if run.rest == Some(0) {
                roots.push(Root { theta, sign, mid: e.mid.unwrap() });
            }
        }
        Ok((roots, warn))
    }

    fn roots_k1(&self, search: &OrbitSearch, evals: &mut usize) -> Result<(Vec<Root>, bool)> {
        let m = search.circle_samples.max(8);
        let angles: Vec<f64> = (0..m).map(|i| 2.0 * PI * i as f64 / m as f64).collect();
        let grid = angles.par_iter().map(|a| self.eval(&circle_point(*a))).collect::<Result<Vec<_>>>()?;
        *evals += m;
        let mut warn = grid.iter().any(|e| e.stalled.as_ref().is_some_and(|s| self.stall_is_suspicious(s)));
        let mut roots = Vec::new();
        for i in 0..m {
            let a = angles[i];
            let b = if i + 1 == m { 2.0 * PI } else { angles[i + 1] };
            let j = (i + 1) % m;
            self.scan(a, &grid[i], b, &grid[j], 4, &mut roots, evals, &mut warn)?;
        }
        Ok((roots, warn))
    }

    #[allow(clippy::too_many_arguments)]
    fn scan(
        &self,
        a: f64,
        ea: &SeedEval,
        b: f64,
        eb: &SeedEval,
        depth: usize,
        roots: &mut Vec<Root>,
        evals: &mut usize,
        warn: &mut bool,
    ) -> Result<()> {
        if ea.near && eb.near {
            if (ea.phi[0] > 0.0) != (eb.phi[0] > 0.0) {
                return self.bisect(a, ea.phi[0], b, eb.phi[0], depth, roots, evals, warn);
            }
            return Ok(());
        }
        if (ea.near || eb.near) && depth > 0 {
            let m = 0.5 * (a + b);
            let em = self.eval(&circle_point(m))?;
            *evals += 1;
            if let Some(s) = &em.stalled {
                *warn |= self.stall_is_suspicious(s);
            }
            self.scan(a, ea, m, &em, depth - 1, roots, evals, warn)?;
            self.scan(m, &em, b, eb, depth - 1, roots, evals, warn)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn bisect(
        &self,
        mut a: f64,
        pa: f64,
        mut b: f64,
        pb: f64,
        depth: usize,
        roots: &mut Vec<Root>,
        evals: &mut usize,
        warn: &mut bool,
    ) -> Result<()> {
        let sign = if pb > pa { 1 } else { -1 };
        let mut last = None;
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            let e = self.eval(&circle_point(m))?;
            *evals += 1;
            if !e.near {
                // Φ leaves the near set inside the bracket: split and rescan
                let ea = self.eval(&circle_point(a))?;
                let eb = self.eval(&circle_point(b))?;
                *evals += 2;
                if depth == 0 {
                    return Ok(());
                }
                self.scan(a, &ea, m, &e, depth - 1, roots, evals, warn)?;
                return self.scan(m, &e, b, &eb, depth - 1, roots, evals, warn);
            }
            if (e.phi[0] > 0.0) == (pa > 0.0) {
                a = m;
            } else {
                b = m;
            }
            let done = b - a < 1e-12 || e.phi[0] == 0.0;
            last = Some((m, e));
            if done {
                break;
            }
        }
        if let Some((m, e)) = last {
            if e.phi[0].abs() <= 1e-6 * self.near_r {
                roots.push(Root { theta: circle_point(m), sign, mid: e.mid.unwrap() });
            } else {
                log::debug!("bracket at θ = {m:.6} closed on a jump of Φ ({:.3e})", e.phi[0]);
            }
        }
        Ok(())
    }

    fn jacobian(&self, theta: &[f64], basis: &[Vec<f64>], phi0: &[f64], h: f64) -> Result<Option<DMatrix<f64>>> {
        let k = basis.len();
        let cols = basis
            .par_iter()
            .map(|t| {
                let th = unit(theta.iter().zip(t).map(|(a, b)| a + h * b).collect());
                self.eval(&th)
            })
            .collect::<Result<Vec<_>>>()?;
        if cols.iter().any(|c| !c.near) {
            return Ok(None);
        }
        Ok(Some(DMatrix::from_fn(k, k, |i, j| (cols[j].phi[i] - phi0[i]) / h)))
    }

    fn newton(
        &self,
        start: Vec<f64>,
        first: SeedEval,
        search: &OrbitSearch,
        evals: &mut usize,
    ) -> Result<Option<Root>> {
        let k = start.len() - 1;
        let tol = 1e-7 * (1.0 + self.near_r);
        let (mut theta, mut cur) = (start, first);
        for _ in 0..search.newton_iters {
            let basis = tangent_basis(&theta);
            let Some(j) = self.jacobian(&theta, &basis, &cur.phi, search.fd_step)? else {
                return Ok(None);
            };
            *evals += k;
            let r = norm(&cur.phi);
            if r <= tol {
                let det = j.determinant();
                if det == 0.0 {
                    return Ok(None);
                }
                return Ok(Some(Root { theta, sign: det.signum() as i64, mid: cur.mid.unwrap() }));
            }
            let Some(step) = j.clone().lu().solve(&nalgebra::DVector::from_column_slice(&cur.phi)) else {
                return Ok(None);
            };
            let mut delta: Vec<f64> = step.iter().map(|v| -v).collect();
            let sn = norm(&delta);
            if sn > 0.3 {
                delta.iter_mut().for_each(|v| *v *= 0.3 / sn);
            }
            let mut moved = false;
            let mut alpha = 1.0;
            for _ in 0..8 {
                let mut th = theta.clone();
                for (d, t) in delta.iter().zip(&basis) {
                    th.iter_mut().zip(t).for_each(|(x, y)| *x += alpha * d * y);
                }
                let th = unit(th);
                let e = self.eval(&th)?;
                *evals += 1;
                if e.near && norm(&e.phi) < r {
                    theta = th;
                    cur = e;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                return Ok(None);
            }
        }
        Ok(None)
    }

    /// Moves a far seed into the near set by minimising the crossing
    /// distance over a tangent chart of the seed sphere.
    fn approach(&self, theta: &[f64], step: f64, evals: &mut usize) -> Result<Option<(Vec<f64>, SeedEval)>> {
        let basis = tangent_basis(theta);
        let chart = |d: &[f64]| {
            let mut th = theta.to_vec();
            for (c, t) in d.iter().zip(&basis) {
                th.iter_mut().zip(t).for_each(|(x, y)| *x += c * y);
            }
            unit(th)
        };
        let mut failure = None;
        let budget = 40 * basis.len();
        let (best, _) = nelder_mead(
            |d| match self.eval(&chart(d)) {
                Ok(e) => e.dist,
                Err(err) => {
                    failure.get_or_insert(err);
                    f64::INFINITY
                }
            },
            &vec![0.0; basis.len()],
            step,
            budget,
            0.5 * self.near_r,
        );
        *evals += budget;
        if let Some(e) = failure {
            return Err(e);
        }
        let th = chart(&best);
        let e = self.eval(&th)?;
        Ok(e.near.then_some((th, e)))
    }

    fn roots_high(&self, search: &OrbitSearch, evals: &mut usize) -> Result<(Vec<Root>, bool)> {
        let k = self.zp.degree as usize;
        let count = search.sphere_samples * k * k;
        let pts = sphere_points(k + 1, count, search.seed);
        let grid = pts.par_iter().map(|t| self.eval(t)).collect::<Result<Vec<_>>>()?;
        *evals += count;
        let warn = grid.iter().any(|e| e.stalled.as_ref().is_some_and(|s| self.stall_is_suspicious(s)));
        // near seeds rank by |Φ|, far ones by crossing distance behind them
        let merit = |e: &SeedEval| if e.near { norm(&e.phi) } else { self.near_r + e.dist };
        let neighbours = 2 * (k + 1);
        let spacing = (4.0 * PI / count as f64).powf(1.0 / k as f64);
        let mut starts: Vec<usize> = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if !(grid[i].dist < 3.0 * self.near_r) {
                continue;
            }
            let mut d: Vec<(usize, f64)> =
                pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(j, q)| (j, -dot(p, q))).collect();
            d.sort_by(|a, b| a.1.total_cmp(&b.1));
            if d.iter().take(neighbours).all(|(j, _)| merit(&grid[*j]) >= merit(&grid[i])) {
                starts.push(i);
            }
        }
        let mut roots = Vec::new();
        for i in starts {
            let first = if grid[i].near {
                Some((pts[i].clone(), self.eval(&pts[i])?))
            } else {
                self.approach(&pts[i], spacing, evals)?
            };
            if let Some((th, e)) = first {
                if let Some(r) = self.newton(th, e, search, evals)? {
                    roots.push(r);
                }
            }
        }
        Ok((roots, warn))
    }

    fn find(&self, search: &OrbitSearch, evals: &mut usize) -> Result<(Vec<Root>, bool)> {
        match self.zp.degree {
            0 => self.roots_k0(evals),
            1 => self.roots_k1(search, evals),
            _ => self.roots_high(search, evals),
        }
    }
}

fn merge<S: MorseSystem>(sys: &S, roots: &[Root], radius: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, r) in roots.iter().enumerate() {
        if kept.iter().all(|&j| sys.distance(&roots[j].mid, &r.mid) >= radius) {
            kept.push(i);
        }
    }
    kept
}

/// Connecting orbits from `z` (degree k+1) to `zp` (degree k) of the
/// system's flow, with local-degree signs taken against the two charts.
/// `all` lists every known rest point; it fixes the near radius and the
/// transversality check.
pub fn find_flow_lines<S: MorseSystem>(
    sys: &S,
    z: &CriticalPoint,
    zp: &CriticalPoint,
    all: &[CriticalPoint],
    opts: &FlowOptions,
    search: &OrbitSearch,
) -> Result<PairCensus> {
    if z.degree != zp.degree + 1 {
        return Err(Error::Usage(format!("orbit search needs adjacent degrees, got {} → {}", z.degree, zp.degree)));
    }
    let mut census = PairCensus {
        from: z.id,
        to: zp.id,
        orbits: Vec::new(),
        signed_count: 0,
        transversality_warning: false,
        stable: true,
        evaluations: 0,
    };
    if z.energy <= zp.energy {
        return Ok(census);
    }
    let gap = z.energy - zp.energy;
    let near_r = search.near_frac
        * all
            .iter()
            .filter(|c| c.id != zp.id)
            .map(|c| sys.distance(&c.state, &zp.state))
            .fold(f64::INFINITY, f64::min)
            .min(sys.distance(&z.state, &zp.state));
    let pair = |eps: f64| Pair {
        sys,
        z,
        zp,
        others: all,
        level: zp.energy + search.level_frac * gap,
        mid: 0.5 * (z.energy + zp.energy),
        near_r,
        eps,
        opts: *opts,
    };
    let radius = search.merge_frac * sys.distance(&z.state, &zp.state);
    let mut evals = 0;
    let (roots, warn) = pair(search.eps).find(search, &mut evals)?;
    let kept = merge(sys, &roots, radius);
    census.transversality_warning = warn;
    census.orbits = kept
        .iter()
        .map(|&i| Orbit { sign: roots[i].sign, theta: roots[i].theta.clone(), crossing: roots[i].mid.clone() })
        .collect();
    census.signed_count = census.orbits.iter().map(|o| o.sign).sum();
    if search.stability_check {
        let n = kept.len();
        let same_merge = [0.5, 1.5].iter().all(|f| merge(sys, &roots, f * radius).len() == n);
        let (again, _) = pair(0.7 * search.eps).find(search, &mut evals)?;
        let again: Vec<i64> = merge(sys, &again, radius).iter().map(|&i| again[i].sign).collect();
        census.stable = same_merge && again.len() == n && again.iter().sum::<i64>() == census.signed_count;
        if !census.stable {
            log::warn!(
                "orbit count {} → {} unstable: {} orbits (signed {}) vs {} at 0.7·eps",
                z.id,
                zp.id,
                n,
                census.signed_count,
                again.len()
            );
        }
    }
    if warn {
        log::warn!("seeds from {} stalled at a rest point of index ≥ {}", z.id, z.degree);
    }
    census.evaluations = evals;
    Ok(census)
}
