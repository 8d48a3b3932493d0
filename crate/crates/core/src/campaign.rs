use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;
use crate::geodesics::bvp::solve_bvp;
use crate::geodesics::stima::BoundReport;
use crate::geometry::bounds::{estimate_inputs, GammaBounds};
use crate::geometry::metric::{MetricFormula, SplitMetric};
use crate::pipeline::{bound_checks, BOUND_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignMetric {
    pub metric_id: usize,
    pub formula: MetricFormula,
    pub records: usize,
    pub report: BoundReport,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub metrics: Vec<CampaignMetric>,
    pub total_checks: usize,
    pub violations: usize,
}

impl CampaignReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric_id,record_id,inequality,lhs,rhs,slack\n");
        for m in &self.metrics {
            for c in &m.report.checks {
                out.push_str(&format!(
                    "{},{},{},{:.16e},{:.16e},{:.16e}\n",
                    m.metric_id, c.record_id, c.inequality, c.lhs, c.rhs, c.slack
                ));
            }
        }
        out
    }
}

/// Perturbed catalog metrics around the unit product: cos-perturbed β
/// and Gaussian-bump α alternate.
pub fn random_formula(rng: &mut ChaCha8Rng, i: usize) -> MetricFormula {
    let alpha = rng.gen_range(0.8..1.2);
    let beta = rng.gen_range(0.8..1.2);
    if i.is_multiple_of(2) {
        MetricFormula::CosPerturbedBeta { alpha, beta, amp: rng.gen_range(0.0..0.15), freq: rng.gen_range(0.5..2.0) }
    } else {
        MetricFormula::GaussianBumpAlpha { alpha, amp: rng.gen_range(0.0..0.3), width: rng.gen_range(0.5..1.5), beta }
    }
}

/// Checks every a-priori inequality on the geodesics of `n` random metrics
/// on the configured manifold and endpoints. `n = 0` checks the configured
/// metric itself.
pub fn verify_bounds_campaign(cfg: &RunConfig, n: usize, seed: u64) -> Result<CampaignReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let formulas: Vec<MetricFormula> =
        if n == 0 { vec![cfg.metric.clone()] } else { (0..n).map(|i| random_formula(&mut rng, i)).collect() };
    let mut metrics = Vec::with_capacity(formulas.len());
    for (id, formula) in formulas.into_iter().enumerate() {
        let metric = SplitMetric::from_formula(cfg.manifold, &formula);
        let mut inputs = estimate_inputs(&metric, cfg.bounds.s0, None);
        if let Some(a) = cfg.bounds.a {
            inputs.a = a;
        }
        if let Some(b) = cfg.bounds.b {
            inputs.b = b;
        }
        let bounds = GammaBounds::derive(&inputs, cfg.endpoints.y0, cfg.endpoints.y1)?;
        let records = solve_bvp(&metric, &cfg.endpoints, &bounds, &cfg.search)?;
        let report = bound_checks(&metric, &cfg.endpoints, &bounds, &cfg.search, &records)?;
        let violations = report.violations(BOUND_TOL);
        if violations > 0 {
            log::warn!("metric {id}: {violations} bound violations");
        }
        metrics.push(CampaignMetric { metric_id: id, formula, records: records.len(), report, violations });
    }
    Ok(CampaignReport {
        seed,
        total_checks: metrics.iter().map(|m| m.report.checks.len()).sum(),
        violations: metrics.iter().map(|m| m.violations).sum(),
        metrics,
    })
}
