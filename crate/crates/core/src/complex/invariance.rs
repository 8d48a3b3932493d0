use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chain::path_critical_points;
use super::run::{run_complex, ComplexRun, ComplexSettings};
use crate::error::{Error, Result};
use crate::geodesics::bvp::{EndpointPair, GeodesicRecord};
use crate::geometry::bounds::GammaBounds;
use crate::geometry::metric::SplitMetric;
use crate::linalg::dot;
use crate::pathflow::field::FlowConfig;
use crate::pathflow::flow::{run_flow, FlowOptions};
use crate::pathflow::interliv::SUP_SAMPLES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeComparison {
    pub degree: i64,
    pub betti0: usize,
    pub betti1: usize,
    pub torsion0: Vec<String>,
    pub torsion1: Vec<String>,
    pub equal: bool,
}

/// Image of one generator under the continuation flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationEntry {
    pub from: usize,
    pub to: Option<usize>,
    pub sign: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub d_alpha: f64,
    pub d_beta: f64,
    pub radius: f64,
    pub window: Option<i64>,
    pub degrees: Vec<DegreeComparison>,
    pub continuation: Vec<ContinuationEntry>,
    pub pass: bool,
}

/// Refuses metric pairs farther apart than λα̲/(2α̲+2β̄+λ) in sup norm.
pub fn check_closeness(metric0: &SplitMetric, metric1: &SplitMetric, bounds: &GammaBounds) -> Result<(f64, f64, f64)> {
    let (da, db) = metric0.sup_distance(metric1, bounds.s0 + 2.0, SUP_SAMPLES);
    let radius = bounds.invariance_radius();
    if da.max(db) >= radius {
        return Err(Error::Usage(format!(
            "metrics differ by ({da:.6e}, {db:.6e}) in sup norm; the admissible radius is {radius:.6e}"
        )));
    }
    Ok((da, db, radius))
}

/// Flows every generator of the first complex with the second metric's
/// field and records the rest point it reaches; the sign compares the
/// two unstable orientations.
pub fn continuation_map(
    metric0: &SplitMetric,
    records0: &[GeodesicRecord],
    metric1: &SplitMetric,
    records1: &[GeodesicRecord],
    mesh: usize,
    cfg: &FlowConfig,
) -> Result<Vec<ContinuationEntry>> {
    let opts = FlowOptions::from(cfg);
    let mut out = Vec::new();
    for r0 in records0.iter().filter(|r| r.index.as_ref().is_some_and(|i| i.i_disc.is_some())) {
        let class: Vec<&GeodesicRecord> = records1.iter().filter(|r| r.winding == r0.winding).collect();
        if class.is_empty() {
            out.push(ContinuationEntry { from: r0.id, to: None, sign: 0 });
            continue;
        }
        let (sys1, points1) = path_critical_points(metric1, &class, mesh, cfg)?;
        let (_, points0) = path_critical_points(metric0, &[r0], mesh, cfg)?;
        let z0 = &points0[0];
        let rests: Vec<Vec<f64>> = points1.iter().map(|p| p.state.clone()).collect();
        let run = run_flow(&sys1, &z0.state, &opts, &rests)?;
        let entry = match run.rest.map(|i| &points1[i]) {
            Some(z1) if z1.degree == z0.degree => {
                let k = z0.chart.dim();
                let m = DMatrix::from_fn(k, k, |i, j| dot(&z1.chart.duals[i], &z0.chart.frame[j]));
                let det = if k == 0 { 1.0 } else { m.determinant() };
                ContinuationEntry { from: z0.id, to: Some(z1.id), sign: det.signum() as i64 }
            }
            _ => ContinuationEntry { from: z0.id, to: None, sign: 0 },
        };
        out.push(entry);
    }
    Ok(out)
}

/// Builds both complexes independently and compares homology in the
/// common window.
pub fn perturbation_invariance(
    metric0: &SplitMetric,
    metric1: &SplitMetric,
    bounds: &GammaBounds,
    ends: &EndpointPair,
    settings: &ComplexSettings,
    with_continuation: bool,
) -> Result<InvarianceReport> {
    let (d_alpha, d_beta, radius) = check_closeness(metric0, metric1, bounds)?;
    let a: ComplexRun = run_complex(metric0, ends, bounds, settings)?;
    let b: ComplexRun = run_complex(metric1, ends, bounds, settings)?;
    let window = match (a.homology.window, b.homology.window) {
        (Some(x), Some(y)) => Some(x.min(y)),
        _ => None,
    };
    let degrees: Vec<DegreeComparison> = match window {
        None => Vec::new(),
        Some(w) => (0..=w)
            .map(|k| {
                let get = |h: &super::homology::HomologyResult| {
                    h.degrees.iter().find(|d| d.degree == k).map_or((0, Vec::new()), |d| (d.betti, d.torsion.clone()))
                };
                let (b0, t0) = get(&a.homology);
                let (b1, t1) = get(&b.homology);
                DegreeComparison {
                    degree: k,
                    equal: b0 == b1 && t0 == t1,
                    betti0: b0,
                    betti1: b1,
                    torsion0: t0,
                    torsion1: t1,
                }
            })
            .collect(),
    };
    let continuation = if with_continuation {
        let cfg = FlowConfig::from_bounds(bounds);
        continuation_map(metric0, &a.records, metric1, &b.records, settings.mesh, &cfg)?
    } else {
        Vec::new()
    };
    let stable = a.homology.unstable_pairs == 0 && b.homology.unstable_pairs == 0;
    Ok(InvarianceReport {
        d_alpha,
        d_beta,
        radius,
        window,
        pass: stable && degrees.iter().all(|d| d.equal),
        degrees,
        continuation,
    })
}
