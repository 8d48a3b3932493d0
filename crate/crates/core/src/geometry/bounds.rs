use serde::{Deserialize, Serialize};

use super::metric::SplitMetric;
use crate::error::{Error, Result};

/// Cap applied to λ = 2/p₁ when p₁ vanishes (a = 0).
pub const LAMBDA_MAX: f64 = 1e3;

/// Inflation applied to sampled (a, b) when they are estimated.
const AB_INFLATION: f64 = 1.1;

/// The raw parameters (s₀, α̲, ᾱ, β̲, β̄, a, b) of the family Γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub s0: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub a: f64,
    pub b: f64,
}

/// Γ parameters plus the constants derived for a given endpoint gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaBounds {
    pub s0: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    pub a: f64,
    pub b: f64,
    /// |y₁ − y₀|
    pub gap: f64,
    pub p1: f64,
    pub q1: f64,
    pub lambda: f64,
    pub c0: f64,
}

/// p₁ = a/(a+b) · β̄/β̲² · e^{2(a+b)s₀}; zero when a = 0.
pub fn p1(s0: f64, beta_lo: f64, beta_hi: f64, a: f64, b: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    a / (a + b) * beta_hi / (beta_lo * beta_lo) * (2.0 * (a + b) * s0).exp()
}

/// q₁ = β̄²/β̲² · |y₁ − y₀|² · e^{2(a+b)s₀}
pub fn q1(s0: f64, beta_lo: f64, beta_hi: f64, a: f64, b: f64, gap: f64) -> f64 {
    (beta_hi * beta_hi) / (beta_lo * beta_lo) * gap * gap * (2.0 * (a + b) * s0).exp()
}

impl GammaBounds {
    /// Fills p₁, q₁, λ = min(2/p₁, λ_max) and c₀ = −½(β̄ + λ)q₁ − 1.
    pub fn derive(inputs: &BoundInputs, y0: f64, y1: f64) -> Result<GammaBounds> {
        let BoundInputs { s0, alpha_lo, alpha_hi, beta_lo, beta_hi, a, b } = *inputs;
        for v in [y0, y1] {
            if v.abs() >= s0 {
                return Err(Error::EndpointOutsideSlab { value: v.abs(), s0 });
            }
        }
        if !(s0 > 0.0 && alpha_lo > 0.0 && beta_lo > 0.0) || a < 0.0 || b < 0.0 {
            return Err(Error::Usage(format!("invalid bound inputs {inputs:?}")));
        }
        if alpha_lo > alpha_hi || beta_lo > beta_hi {
            return Err(Error::Usage(format!("lower bound exceeds upper bound in {inputs:?}")));
        }
        let gap = (y1 - y0).abs();
        let p = p1(s0, beta_lo, beta_hi, a, b);
        let q = q1(s0, beta_lo, beta_hi, a, b, gap);
        let lambda = if p > 0.0 { (2.0 / p).min(LAMBDA_MAX) } else { LAMBDA_MAX };
        let c0 = -0.5 * (beta_hi + lambda) * q - 1.0;
        Ok(GammaBounds { s0, alpha_lo, alpha_hi, beta_lo, beta_hi, a, b, gap, p1: p, q1: q, lambda, c0 })
    }

    pub fn inputs(&self) -> BoundInputs {
        BoundInputs {
            s0: self.s0,
            alpha_lo: self.alpha_lo,
            alpha_hi: self.alpha_hi,
            beta_lo: self.beta_lo,
            beta_hi: self.beta_hi,
            a: self.a,
            b: self.b,
        }
    }

    /// p₁ and q₁ of the shifted family (β̲ + μ, β̄ + μ).
    pub fn shifted_constants(&self, mu: f64) -> (f64, f64) {
        (
            p1(self.s0, self.beta_lo + mu, self.beta_hi + mu, self.a, self.b),
            q1(self.s0, self.beta_lo + mu, self.beta_hi + mu, self.a, self.b, self.gap),
        )
    }

    /// Energy lower bound −½β̄q₁ for geodesics.
    pub fn energy_floor(&self) -> f64 {
        -0.5 * self.beta_hi * self.q1
    }

    /// Radius λα̲/(2α̲ + 2β̄ + λ) within which two metrics of the family have
    /// isomorphic Morse homology.
    pub fn invariance_radius(&self) -> f64 {
        self.lambda * self.alpha_lo / (2.0 * self.alpha_lo + 2.0 * self.beta_hi + self.lambda)
    }

    /// Radius λα̲/(α̲ + β̄) of the interleaving lemma.
    pub fn interleave_radius(&self) -> f64 {
        self.lambda * self.alpha_lo / (self.alpha_lo + self.beta_hi)
    }

    /// Smallest family containing both.
    pub fn union_inputs(a: &BoundInputs, b: &BoundInputs) -> BoundInputs {
        BoundInputs {
            s0: a.s0.max(b.s0),
            alpha_lo: a.alpha_lo.min(b.alpha_lo),
            alpha_hi: a.alpha_hi.max(b.alpha_hi),
            beta_lo: a.beta_lo.min(b.beta_lo),
            beta_hi: a.beta_hi.max(b.beta_hi),
            a: a.a.max(b.a),
            b: a.b.max(b.b),
        }
    }
}

/// Measured (h0)–(h4) data of a metric on a y-window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievedBounds {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub beta_lo: f64,
    pub beta_hi: f64,
    /// sup |∂ᵧα|/α
    pub a: f64,
    /// sup |∂ᵧβ|/β
    pub b: f64,
    /// sample points where (h0) fails
    pub h0_violations: usize,
}

pub fn achieved_bounds(metric: &SplitMetric, s0: f64, ymax: f64, samples: usize) -> AchievedBounds {
    let mut r = AchievedBounds {
        alpha_lo: f64::INFINITY,
        alpha_hi: f64::NEG_INFINITY,
        beta_lo: f64::INFINITY,
        beta_hi: f64::NEG_INFINITY,
        a: 0.0,
        b: 0.0,
        h0_violations: 0,
    };
    for i in 0..=samples {
        let y = -ymax + 2.0 * ymax * i as f64 / samples as f64;
        let c = metric.coeffs(y);
        r.alpha_lo = r.alpha_lo.min(c.a);
        r.alpha_hi = r.alpha_hi.max(c.a);
        r.beta_lo = r.beta_lo.min(c.b);
        r.beta_hi = r.beta_hi.max(c.b);
        r.a = r.a.max(c.a1.abs() / c.a);
        r.b = r.b.max(c.b1.abs() / c.b);
        if (y >= s0 && c.a1 > super::convexity::EIG_TOL) || (y <= -s0 && c.a1 < -super::convexity::EIG_TOL) {
            r.h0_violations += 1;
        }
    }
    r
}

/// Estimates Γ parameters from samples on X × [−s₀−1, s₀+1]. Sampled
/// (a, b) are inflated by 10 %; `ab` overrides them.
pub fn estimate_inputs(metric: &SplitMetric, s0: f64, ab: Option<(f64, f64)>) -> BoundInputs {
    let m = achieved_bounds(metric, s0, s0 + 1.0, 4000);
    let (a, b) = ab.unwrap_or((m.a * AB_INFLATION, m.b * AB_INFLATION));
    BoundInputs { s0, alpha_lo: m.alpha_lo, alpha_hi: m.alpha_hi, beta_lo: m.beta_lo, beta_hi: m.beta_hi, a, b }
}
