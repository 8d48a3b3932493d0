use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::bounds::GammaBounds;
use crate::geometry::metric::SplitMetric;

pub const SUP_SAMPLES: usize = 4000;

/// Explicit bounds on {E_{α₀,β₀} ≤ c} ∩ {E_{α₁,β₁+λ} ≥ c′}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterlivBounds {
    pub d_alpha: f64,
    pub d_beta: f64,
    /// λα̲/(α̲ + β̄): the admissible closeness radius.
    pub radius: f64,
    /// λ − ‖β₁−β₀‖ − (β̄/α̲)‖α₁−α₀‖, positive under the precondition.
    pub kappa: f64,
    /// Bound on ‖y′‖₂²; negative means the set is empty.
    pub y_prime_sq: f64,
    /// Bound on ∫g(x′,x′).
    pub x_prime_sq: f64,
}

impl InterlivBounds {
    pub fn empty_set(&self) -> bool {
        self.y_prime_sq < 0.0
    }
}

/// Sup-distances are sampled on [−(s₀+2), s₀+2]; outside the slab both
/// metrics are expected to agree up to their cutoff constants.
pub fn interliv_bound(
    c: f64,
    c_prime: f64,
    bounds: &GammaBounds,
    metric0: &SplitMetric,
    metric1: &SplitMetric,
) -> Result<InterlivBounds> {
    let (d_alpha, d_beta) = metric0.sup_distance(metric1, bounds.s0 + 2.0, SUP_SAMPLES);
    interliv_from_distances(c, c_prime, bounds, d_alpha, d_beta)
}

pub fn interliv_from_distances(
    c: f64,
    c_prime: f64,
    bounds: &GammaBounds,
    d_alpha: f64,
    d_beta: f64,
) -> Result<InterlivBounds> {
    let (al, bh, lam) = (bounds.alpha_lo, bounds.beta_hi, bounds.lambda);
    let radius = lam * al / (al + bh);
    if d_alpha.max(d_beta) >= radius {
        return Err(Error::Usage(format!(
            "metrics differ by ({d_alpha:.6e}, {d_beta:.6e}) in sup norm; the admissible radius is {radius:.6e}"
        )));
    }
    let kappa = lam - d_beta - bh / al * d_alpha;
    let y_prime_sq = (2.0 * c * (1.0 + d_alpha / al) - 2.0 * c_prime) / kappa;
    let x_prime_sq = 2.0 * c / al + bh / al * y_prime_sq.max(0.0);
    Ok(InterlivBounds { d_alpha, d_beta, radius, kappa, y_prime_sq, x_prime_sq })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::bounds::BoundInputs;
    use crate::geometry::manifold::ManifoldModel;
    use crate::pathflow::energy::{energy, x_dirichlet, y_dirichlet};
    use crate::pathflow::path::DiscretePath;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bounds() -> GammaBounds {
        let inputs = BoundInputs { s0: 2.0, alpha_lo: 1.0, alpha_hi: 1.0, beta_lo: 1.0, beta_hi: 1.0, a: 0.5, b: 0.5 };
        GammaBounds::derive(&inputs, 0.0, 0.2).unwrap()
    }

    #[test]
    fn identical_metrics_reduce_to_level_gap() {
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let b = bounds();
        let r = interliv_bound(3.0, 1.0, &b, &m, &m).unwrap();
        assert_relative_eq!(r.y_prime_sq, 4.0 / b.lambda, epsilon = 1e-14);
        assert!(interliv_bound(1.0, 3.0, &b, &m, &m).unwrap().empty_set());
    }

    #[test]
    fn far_metrics_are_refused_with_radius() {
        let m0 = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let m1 = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0 + 10.0);
        let e = interliv_bound(1.0, 0.0, &bounds(), &m0, &m1).unwrap_err();
        assert!(e.to_string().contains("admissible radius"));
    }

    #[test]
    fn sampled_paths_obey_bounds() {
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let b = bounds();
        let (c, cp) = (2.0, -1.0);
        let r = interliv_bound(c, cp, &b, &m, &m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..4000 {
            let mut p = DiscretePath::straight(ManifoldModel::Circle, &[0.0], 0.0, &[1.0], 0.2, 8).unwrap();
            let s = rng.gen_range(0.0..1.5);
            for k in 1..=8 {
                p.x[k][0] += s * rng.gen_range(-1.0..1.0);
                p.y[k] += s * rng.gen_range(-1.0..1.0);
            }
            if energy(&m, &p, 0.0) <= c && energy(&m, &p, b.lambda) >= cp {
                hits += 1;
                assert!(2.0 * y_dirichlet(&p) <= r.y_prime_sq + 1e-12);
                assert!(x_dirichlet(&p) <= r.x_prime_sq + 1e-12);
            }
        }
        assert!(hits > 100);
    }
}
