use serde::{Deserialize, Serialize};

use super::energy::{differential_coords, energy_diff};
use super::path::{DiscretePath, PathTangent, WMetric};
use crate::error::{Error, Result};
use crate::geometry::bounds::GammaBounds;
use crate::geometry::metric::SplitMetric;
use crate::linalg::{dot, smoothstep};

/// Cosine below −1 + this counts as antiparallel gradients.
pub const ANTIPARALLEL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub lambda: f64,
    pub c0: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Converged once ‖F‖_W drops below this.
    pub rest_tol: f64,
    /// W-distance at which a limit is assigned to a known rest point.
    pub basin_radius: f64,
    pub t_max: f64,
    /// Keep y maximising the energy for fixed x after every step, so the
    /// flow runs on the reduced x-space.
    pub relax_y: bool,
    /// Relative slack of the energy-increase veto.
    pub veto_slack: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            lambda: 1.0,
            c0: -1.0,
            rtol: 1e-8,
            atol: 1e-10,
            rest_tol: 1e-8,
            basin_radius: 1e-4,
            t_max: 500.0,
            relax_y: true,
            veto_slack: 1e-13,
        }
    }
}

impl FlowConfig {
    pub fn from_bounds(bounds: &GammaBounds) -> Self {
        FlowConfig { lambda: bounds.lambda, c0: bounds.c0, ..FlowConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.rest_tol > 0.0) || !(self.t_max > 0.0) {
            return Err(Error::Usage("flow config needs λ, rest_tol and t_max positive".into()));
        }
        Ok(())
    }
}

/// χ: 0 on (−∞, 0], 1 on [1, ∞), monotone in between.
pub fn chi(s: f64) -> f64 {
    smoothstep(s)
}

/// F at one path with the quantities the Lyapunov checks need.
#[derive(Debug, Clone)]
pub struct FieldEval {
    /// F in frame coordinates.
    pub coords: Vec<f64>,
    pub e: f64,
    pub e_lam: f64,
    pub chi: f64,
    pub f_norm: f64,
    pub grad_norm: f64,
    /// DE_{α,β}[F] and DE_{α,β+λ}[F].
    pub de_f: f64,
    pub de_lam_f: f64,
    pub antiparallel: bool,
}

impl FieldEval {
    pub fn tangent(&self, path: &DiscretePath) -> PathTangent {
        path.from_coords(&self.coords, &path.frames())
    }
}

/// F = G/√(1+‖G‖²) with −G = ∇E_{α,β} + χ(c₀ − E_{α,β+λ})·(‖∇E_{α,β}‖/‖∇E_{α,β+λ}‖)·∇E_{α,β+λ}.
#[allow(non_snake_case)]
pub fn pseudo_gradient_F(metric: &SplitMetric, path: &DiscretePath, cfg: &FlowConfig) -> Result<FieldEval> {
    let frames = path.frames();
    let w = WMetric::assemble(path, &frames)?;
    let d0 = energy_diff(metric, path, 0.0);
    let dl = energy_diff(metric, path, cfg.lambda);
    let diff0 = differential_coords(path, &d0, &frames);
    let diffl = differential_coords(path, &dl, &frames);
    let g0 = w.raise(&diff0);
    let gl = w.raise(&diffl);
    let n0 = dot(&g0, &diff0).max(0.0).sqrt();
    let nl = dot(&gl, &diffl).max(0.0).sqrt();
    let x = chi(cfg.c0 - dl.value);
    let mut neg_g = g0.clone();
    let mut antiparallel = false;
    if x > 0.0 {
        if nl == 0.0 {
            if n0 > 0.0 {
                return Err(Error::Contract(format!(
                    "∇E_{{α,β+λ}} vanishes where the cutoff is active (E_λ = {})",
                    dl.value
                )));
            }
        } else {
            let r = x * n0 / nl;
            for (a, b) in neg_g.iter_mut().zip(&gl) {
                *a += r * b;
            }
            if n0 > 0.0 {
                let cos = dot(&g0, &diffl) / (n0 * nl);
                if cos < -1.0 + ANTIPARALLEL_TOL {
                    antiparallel = true;
                    log::warn!("near-antiparallel gradients (cos = {cos:.9}) at E_λ = {}", dl.value);
                }
            }
        }
    }
    let gn = w.inner(&neg_g, &neg_g).max(0.0).sqrt();
    let s = -1.0 / (1.0 + gn * gn).sqrt();
    let coords: Vec<f64> = neg_g.iter().map(|v| v * s).collect();
    Ok(FieldEval {
        de_f: dot(&diff0, &coords),
        de_lam_f: dot(&diffl, &coords),
        f_norm: gn / (1.0 + gn * gn).sqrt(),
        coords,
        e: d0.value,
        e_lam: dl.value,
        chi: x,
        grad_norm: n0,
        antiparallel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::ManifoldModel;
    use crate::pathflow::energy::gradient;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn cyl() -> SplitMetric {
        SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0)
    }

    #[test]
    fn inactive_cutoff_is_normalised_gradient() {
        let m = cyl();
        let mut p = DiscretePath::straight(ManifoldModel::Circle, &[0.0], 0.0, &[PI / 2.0], 0.3, 8).unwrap();
        p.x[3][0] += 0.2;
        p.y[5] -= 0.1;
        let cfg = FlowConfig { c0: -50.0, ..FlowConfig::default() };
        let f = pseudo_gradient_F(&m, &p, &cfg).unwrap();
        assert_eq!(f.chi, 0.0);
        let g = gradient(&m, &p, 0.0).unwrap();
        let gc = p.to_coords(&g, &p.frames());
        let s = 1.0 / (1.0 + f.grad_norm * f.grad_norm).sqrt();
        for (a, b) in f.coords.iter().zip(&gc) {
            assert_relative_eq!(*a, -b * s, epsilon = 1e-12);
        }
        assert!(f.f_norm < 1.0 && f.de_f < 0.0);
    }

    #[test]
    fn vanishes_at_geodesic() {
        let m = cyl();
        let p = DiscretePath::straight(ManifoldModel::Circle, &[0.0], 0.0, &[PI / 2.0], 0.3, 8).unwrap();
        let f = pseudo_gradient_F(&m, &p, &FlowConfig::default()).unwrap();
        assert!(f.f_norm < 1e-12);
    }

    #[test]
    fn deep_region_decreases_both() {
        let m = cyl();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = FlowConfig { lambda: 1.0, c0: -3.0, ..FlowConfig::default() };
        for _ in 0..20 {
            let mut p = DiscretePath::straight(ManifoldModel::Circle, &[0.0], 0.0, &[1.0], 0.0, 16).unwrap();
            let amp = rng.gen_range(1.0..3.0);
            for k in 1..=16 {
                p.y[k] = amp * ((k % 2) as f64 - 0.5) + rng.gen_range(-0.05..0.05);
            }
            let f = pseudo_gradient_F(&m, &p, &cfg).unwrap();
            assert_eq!(f.chi, 1.0);
            assert!(f.de_f <= 0.0 && f.de_lam_f <= 0.0);
            assert!(f.f_norm < 1.0);
        }
    }
}
