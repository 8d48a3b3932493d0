use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::FlowConfig;
use super::flow::flow;
use super::hilvec::hilvec_bound;
use super::path::{DiscretePath, PathTangent};
use crate::error::Result;
use crate::geometry::manifold::ManifoldModel;
use crate::geometry::metric::{MetricFormula, SplitMetric};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HilvecFuzz {
    pub cases: usize,
    pub failures: usize,
    pub min_slack: f64,
}

/// Random (u, v, χ) in dimensions 1..=16, with a share of near-parallel,
/// antiparallel and tiny-norm pairs mixed in.
pub fn hilvec_fuzz(cases: usize, seed: u64) -> Result<HilvecFuzz> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for i in 0..cases {
        let dim = rng.gen_range(1..=16);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let mut u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        match i % 8 {
            0 => u.iter_mut().zip(&v).for_each(|(a, b)| *a = -b * rng.gen_range(0.1..10.0)),
            1 => u.iter_mut().zip(&v).for_each(|(a, b)| *a = b + *a * 1e-9),
            2 => u.iter_mut().for_each(|a| *a *= 1e-8),
            _ => {}
        }
        if v.iter().all(|x| *x == 0.0) {
            continue;
        }
        let chi = match i % 5 {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen_range(0.0..=1.0),
        };
        let h = hilvec_bound(&u, &v, chi)?;
        min_slack = min_slack.min(h.slack);
        if !h.holds {
            failures += 1;
        }
    }
    Ok(HilvecFuzz { cases, failures, min_slack })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCase {
    pub name: String,
    pub samples: usize,
    /// Sample pairs where E_{α,β} increased.
    pub energy_increases: usize,
    /// Sample pairs below c₀ − 1 where E_{α,β+λ} increased.
    pub shifted_increases: usize,
}

fn catalog() -> Vec<MetricFormula> {
    vec![
        MetricFormula::Product { alpha: 1.0, beta: 1.0 },
        MetricFormula::CosPerturbedBeta { alpha: 1.1, beta: 0.9, amp: 0.1, freq: 1.5 },
        MetricFormula::GaussianBumpAlpha { alpha: 1.0, amp: 0.25, width: 0.8, beta: 1.0 },
        MetricFormula::Polynomial { alpha_coeffs: vec![1.0, 0.0, 0.05], beta_coeffs: vec![1.0, 0.02] },
    ]
}

fn endpoints(model: ManifoldModel) -> (Vec<f64>, Vec<f64>) {
    match model {
        ManifoldModel::Circle => (vec![0.0], vec![1.5]),
        ManifoldModel::Torus2 => (vec![0.0, 0.0], vec![1.0, 2.0]),
        ManifoldModel::Sphere2 => (vec![1.0, 0.0, 0.0], vec![0.6, 0.8, 0.0]),
    }
}

/// Random low-mode bump of the straight path.
fn perturbed(model: ManifoldModel, rng: &mut ChaCha8Rng, mesh: usize) -> Result<DiscretePath> {
    let (x0, x1) = endpoints(model);
    let base = DiscretePath::straight(model, &x0, 0.0, &x1, 0.2, mesh)?;
    let mut t = PathTangent::zeros(&base);
    let modes: Vec<(Vec<f64>, f64)> = (1..=3)
        .map(|_| ((0..model.ambient_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect(), rng.gen_range(-1.0..1.0)))
        .collect();
    for k in 1..=mesh {
        let s = k as f64 / (mesh + 1) as f64;
        for (m, (dx, dy)) in modes.iter().enumerate() {
            let w = (std::f64::consts::PI * (m + 1) as f64 * s).sin() / (m + 1) as f64;
            t.xi[k].iter_mut().zip(dx).for_each(|(a, b)| *a += w * b);
            t.eta[k] += w * dy;
        }
    }
    t.make_tangent(&base);
    Ok(base.retract(&t, 1.0))
}

/// Flows random perturbed paths for every catalog metric on every model,
/// on the reduced space and on the full space.
pub fn lyapunov_suite(seed: u64, mesh: usize) -> Result<Vec<LyapunovCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for model in [ManifoldModel::Circle, ManifoldModel::Torus2, ManifoldModel::Sphere2] {
        for formula in &catalog() {
            let metric = SplitMetric::from_formula(model, formula);
            for relax_y in [true, false] {
                let start = perturbed(model, &mut rng, mesh)?;
                let cfg = FlowConfig {
                    relax_y,
                    lambda: 1.0,
                    c0: -2.0,
                    t_max: if relax_y { 50.0 } else { 5.0 },
                    ..FlowConfig::default()
                };
                let (run, _) = flow(&metric, &start, &cfg, &[])?;
                let (a, b) = run.lyapunov_violations(Some(cfg.c0 - 1.0), 1e-12);
                out.push(LyapunovCase {
                    name: format!("{}/{}/{}", model.name(), formula.name(), if relax_y { "reduced" } else { "full" }),
                    samples: run.samples.len(),
                    energy_increases: a,
                    shifted_increases: b,
                });
            }
        }
    }
    Ok(out)
}
