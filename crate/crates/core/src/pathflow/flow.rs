use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::energy::relax_y;
use super::field::{pseudo_gradient_F, FlowConfig};
use super::path::DiscretePath;
use crate::error::{Error, Result};
use crate::geometry::manifold::normalize;
use crate::geometry::metric::SplitMetric;
use crate::ode::{integrate_until, DenseSolution, OdeOptions};

/// Field value at one state of a flow system.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub f: Vec<f64>,
    pub e: f64,
    /// Secondary Lyapunov function, when the system has one.
    pub e_lam: Option<f64>,
    pub f_norm: f64,
    pub antiparallel: bool,
}

/// A bounded vector field on a flat state space with an optional
/// constraint projection.
pub trait FlowSystem: Sync {
    fn dim(&self) -> usize;
    fn field(&self, s: &[f64]) -> Result<FieldSample>;
    fn project(&self, _s: &mut [f64]) {}
    fn energy(&self, s: &[f64]) -> f64;
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
    /// Level below which `e_lam` must not increase along the flow.
    fn deep_level(&self) -> Option<f64> {
        None
    }
}

/// The pseudo-gradient flow on discrete paths with fixed endpoints.
pub struct PathSystem<'a> {
    pub metric: &'a SplitMetric,
    pub template: DiscretePath,
    pub cfg: FlowConfig,
}

impl<'a> PathSystem<'a> {
    pub fn new(metric: &'a SplitMetric, template: &DiscretePath, cfg: &FlowConfig) -> Self {
        PathSystem { metric, template: template.clone(), cfg: cfg.clone() }
    }

    pub fn path(&self, s: &[f64]) -> DiscretePath {
        let mut p = self.template.with_flat(s);
        if !p.model.is_flat() {
            for k in 1..=p.interior() {
                normalize(&mut p.x[k]);
            }
        }
        p
    }
}

impl FlowSystem for PathSystem<'_> {
    fn dim(&self) -> usize {
        self.template.to_flat().len()
    }

    fn field(&self, s: &[f64]) -> Result<FieldSample> {
        let p = self.path(s);
        let ev = pseudo_gradient_F(self.metric, &p, &self.cfg)?;
        let mut t = ev.tangent(&p);
        if self.cfg.relax_y {
            // y follows x through the projection
            t.eta.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(FieldSample {
            f: p.tangent_to_flat(&t),
            e: ev.e,
            e_lam: Some(ev.e_lam),
            f_norm: ev.f_norm,
            antiparallel: ev.antiparallel,
        })
    }

    fn project(&self, s: &mut [f64]) {
        let mut p = self.path(s);
        if self.cfg.relax_y {
            p = relax_y(self.metric, &p, 0.0, 1e-13).0;
        }
        s.copy_from_slice(&p.to_flat());
    }

    fn energy(&self, s: &[f64]) -> f64 {
        super::energy::energy(self.metric, &self.path(s), 0.0)
    }

    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.path(a).w_distance(&self.path(b))
    }

    fn deep_level(&self) -> Option<f64> {
        Some(self.cfg.c0 - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub rtol: f64,
    pub atol: f64,
    pub rest_tol: f64,
    pub basin_radius: f64,
    pub t_max: f64,
    pub veto_slack: f64,
}

impl From<&FlowConfig> for FlowOptions {
    fn from(c: &FlowConfig) -> Self {
        FlowOptions {
            rtol: c.rtol,
            atol: c.atol,
            rest_tol: c.rest_tol,
            basin_radius: c.basin_radius,
            t_max: c.t_max,
            veto_slack: c.veto_slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub e: f64,
    pub e_lam: Option<f64>,
    pub f_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowOutcome {
    Converged,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub samples: Vec<FlowSample>,
    pub outcome: FlowOutcome,
    pub end: Vec<f64>,
    /// Index of the rest point the flow landed in, if any is within the basin radius.
    pub rest: Option<usize>,
    pub antiparallel_hits: usize,
}

impl FlowRun {
    /// Sample pairs where E increased, and where the secondary function
    /// increased while below `deep`.
    pub fn lyapunov_violations(&self, deep: Option<f64>, slack: f64) -> (usize, usize) {
        let mut a = 0;
        let mut b = 0;
        for w in self.samples.windows(2) {
            if w[1].e > w[0].e + slack * (1.0 + w[0].e.abs()) {
                a += 1;
            }
            if let (Some(d), Some(l0), Some(l1)) = (deep, w[0].e_lam, w[1].e_lam) {
                if l0 < d && l1 < d && l1 > l0 + slack * (1.0 + l0.abs()) {
                    b += 1;
                }
            }
        }
        (a, b)
    }
}

/// Dense trajectory of one flow run.
pub struct Trace {
    pub sol: DenseSolution,
    pub converged: bool,
    /// The energy dropped below the requested stop level.
    pub reached_level: bool,
    pub samples: Vec<FlowSample>,
    pub antiparallel_hits: usize,
}

/// Integrates s′ = F(s) from an already projected state until ‖F‖ ≤
/// rest_tol, the energy drops below `stop_below`, or t_max. Steps that
/// raise the energy are rejected and retried with half the step.
pub fn trace_flow<S: FlowSystem>(sys: &S, s0: &[f64], opts: &FlowOptions, stop_below: Option<f64>) -> Result<Trace> {
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let samples: RefCell<Vec<FlowSample>> = RefCell::new(Vec::new());
    let antiparallel = RefCell::new(0usize);
    let converged = RefCell::new(false);
    let reached = RefCell::new(false);
    let first = sys.field(s0)?;
    samples.borrow_mut().push(FlowSample { t: 0.0, e: first.e, e_lam: first.e_lam, f_norm: first.f_norm });
    let trivial = DenseSolution::constant(0.0, s0);
    if first.f_norm <= opts.rest_tol {
        return Ok(Trace {
            sol: trivial,
            converged: true,
            reached_level: false,
            samples: samples.into_inner(),
            antiparallel_hits: 0,
        });
    }
    if stop_below.is_some_and(|l| first.e < l) {
        return Ok(Trace {
            sol: trivial,
            converged: false,
            reached_level: true,
            samples: samples.into_inner(),
            antiparallel_hits: 0,
        });
    }
    let rhs = |_t: f64, s: &[f64], d: &mut [f64]| match sys.field(s) {
        Ok(fs) => d.copy_from_slice(&fs.f),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            d.iter_mut().for_each(|v| *v = f64::NAN);
        }
    };
    let accept = |a: &[f64], b: &[f64]| {
        let (ea, eb) = (sys.energy(a), sys.energy(b));
        eb <= ea + opts.veto_slack * (1.0 + ea.abs())
    };
    let stop = |t: f64, s: &[f64]| match sys.field(s) {
        Ok(fs) => {
            if fs.antiparallel {
                *antiparallel.borrow_mut() += 1;
            }
            samples.borrow_mut().push(FlowSample { t, e: fs.e, e_lam: fs.e_lam, f_norm: fs.f_norm });
            if fs.f_norm <= opts.rest_tol {
                *converged.borrow_mut() = true;
            }
            if stop_below.is_some_and(|l| fs.e < l) {
                *reached.borrow_mut() = true;
            }
            *converged.borrow() || *reached.borrow()
        }
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            true
        }
    };
    let ode =
        OdeOptions { rtol: opts.rtol, atol: opts.atol, h_init: 1e-2, max_steps: 1_000_000, ..OdeOptions::default() };
    let result = integrate_until(rhs, |s| sys.project(s), accept, stop, 0.0, opts.t_max, s0, &ode);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let (sol, _) = result?;
    Ok(Trace {
        sol,
        converged: converged.into_inner(),
        reached_level: reached.into_inner(),
        samples: samples.into_inner(),
        antiparallel_hits: antiparallel.into_inner(),
    })
}

/// Flows `start` to a rest point (or t_max) and assigns the limit to the
/// nearest of `rest_points` within the basin radius.
pub fn run_flow<S: FlowSystem>(
    sys: &S,
    start: &[f64],
    opts: &FlowOptions,
    rest_points: &[Vec<f64>],
) -> Result<FlowRun> {
    let mut s0 = start.to_vec();
    sys.project(&mut s0);
    let tr = trace_flow(sys, &s0, opts, None)?;
    let end = tr.sol.last().to_vec();
    let rest = rest_points
        .iter()
        .enumerate()
        .map(|(i, r)| (i, sys.distance(&end, r)))
        .filter(|(_, d)| *d < opts.basin_radius)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(FlowRun {
        samples: tr.samples,
        outcome: if tr.converged { FlowOutcome::Converged } else { FlowOutcome::Timeout },
        end,
        rest,
        antiparallel_hits: tr.antiparallel_hits,
    })
}

/// Path flow from `start`; rest points are given as paths on the same mesh.
pub fn flow(
    metric: &SplitMetric,
    start: &DiscretePath,
    cfg: &FlowConfig,
    rest_points: &[DiscretePath],
) -> Result<(FlowRun, DiscretePath)> {
    cfg.validate()?;
    if rest_points.iter().any(|r| !r.same_mesh(start)) {
        return Err(Error::Usage("rest points must share the start path's mesh".into()));
    }
    let sys = PathSystem::new(metric, start, cfg);
    let rests: Vec<Vec<f64>> = rest_points.iter().map(|p| p.to_flat()).collect();
    let run = run_flow(&sys, &start.to_flat(), &FlowOptions::from(cfg), &rests)?;
    let end = sys.path(&run.end);
    Ok((run, end))
}
