use serde::{Deserialize, Serialize};

use super::bvp::GeodesicRecord;
use crate::error::Result;
use crate::geometry::bounds::GammaBounds;
use crate::geometry::metric::SplitMetric;

/// Grid used on top of the integrator steps when measuring sup norms.
const SUP_GRID: usize = 2000;

/// One checked inequality, oriented so that slack ≥ 0 means it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub record_id: usize,
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl BoundCheck {
    fn upper(record_id: usize, name: &str, lhs: f64, rhs: f64) -> Self {
        BoundCheck { record_id, inequality: name.into(), lhs, rhs, slack: rhs - lhs }
    }

    fn lower(record_id: usize, name: &str, lhs: f64, rhs: f64) -> Self {
        BoundCheck { record_id, inequality: name.into(), lhs, rhs, slack: lhs - rhs }
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn violations(&self, tol: f64) -> usize {
        self.checks.iter().filter(|c| !c.holds(tol)).count()
    }

    pub fn extend(&mut self, other: BoundReport) {
        self.checks.extend(other.checks);
    }

    /// `record-id,inequality-id,lhs,rhs,slack` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("record_id,inequality,lhs,rhs,slack\n");
        for c in &self.checks {
            out.push_str(&format!("{},{},{:.16e},{:.16e},{:.16e}\n", c.record_id, c.inequality, c.lhs, c.rhs, c.slack));
        }
        out
    }
}

/// The three a-priori inequalities on one geodesic: ‖y‖∞ ≤ s₀,
/// ‖y′‖∞² ≤ p₁c⁺ + q₁ and c ≥ −½β̄q₁.
pub fn verify_stima(metric: &SplitMetric, record: &GeodesicRecord, bounds: &GammaBounds) -> Result<BoundReport> {
    let tr = record.trajectory(metric, &[])?;
    let (ysup, ypsq) = tr.y_extent(SUP_GRID);
    let c = record.energy;
    let id = record.id;
    Ok(BoundReport {
        checks: vec![
            BoundCheck::upper(id, "y-sup", ysup, bounds.s0),
            BoundCheck::upper(id, "yprime-sup-sq", ypsq, bounds.p1 * c.max(0.0) + bounds.q1),
            BoundCheck::lower(id, "energy-floor", c, -0.5 * bounds.beta_hi * bounds.q1),
        ],
    })
}

/// For critical points of E_{α,β+μ}: E_{α,β+λ} ≥ −½(β̄ + λ)q₁. Each entry
/// pairs μ with the geodesics of the shifted metric (α, β + μ).
pub fn verify_stima2(
    metric: &SplitMetric,
    bounds: &GammaBounds,
    by_shift: &[(f64, Vec<GeodesicRecord>)],
) -> Result<BoundReport> {
    let lam = bounds.lambda;
    let rhs = -0.5 * (bounds.beta_hi + lam) * bounds.q1;
    let mut report = BoundReport::default();
    for (mu, records) in by_shift {
        let shifted = metric.shifted(*mu);
        for r in records {
            let tr = r.trajectory(&shifted, &[])?;
            // E_{α,β+λ}(γ) = E_{α,β+μ}(γ) − ½(λ − μ)∫|y′|²
            let e_lam = r.energy - 0.5 * (lam - mu) * tr.y_dirichlet(SUP_GRID);
            report.checks.push(BoundCheck::lower(r.id, &format!("shifted-floor(mu={mu})"), e_lam, rhs));
        }
    }
    Ok(report)
}
