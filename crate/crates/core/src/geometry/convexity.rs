use serde::{Deserialize, Serialize};

use super::metric::SplitMetric;
use crate::error::{Error, Result};

/// Eigenvalue tolerance of the sign test on ∂ᵧα.
pub const EIG_TOL: f64 = 1e-10;

/// Sample grid for the convexity scan: `ny` values of |y| in [s₀, y_max] on
/// each side, times the x sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_max: f64,
    pub ny: usize,
    pub x_samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexitySample {
    pub x: Vec<f64>,
    pub y: f64,
    /// Largest eigenvalue of ∂ᵧα for y > s₀, of −∂ᵧα for y < −s₀.
    pub max_eigenvalue: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub s0: f64,
    pub convex: bool,
    pub samples: Vec<ConvexitySample>,
}

impl ConvexityReport {
    pub fn violations(&self) -> impl Iterator<Item = &ConvexitySample> {
        self.samples.iter().filter(|s| !s.pass)
    }

    /// One `y max-eigenvalue pass|fail` line per sample.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&format!("{:.16e} {:.16e} {}\n", s.y, s.max_eigenvalue, if s.pass { "pass" } else { "fail" }));
        }
        out
    }
}

/// Checks ∂ᵧα ≤ 0 for y > s₀ and ∂ᵧα ≥ 0 for y < −s₀ on the grid.
pub fn check_convexity(metric: &SplitMetric, s0: f64, grid: &GridSpec) -> Result<ConvexityReport> {
    if grid.ny == 0 || grid.x_samples.is_empty() || !(grid.y_max > s0) {
        return Err(Error::Usage("convexity grid is empty".into()));
    }
    let mut samples = Vec::new();
    for x in &grid.x_samples {
        for side in [1.0, -1.0] {
            for j in 0..grid.ny {
                let s = if grid.ny == 1 {
                    s0
                } else {
                    // open at s0: start just past the slab boundary
                    s0 + (grid.y_max - s0) * (j as f64 + 1.0) / grid.ny as f64
                };
                let y = side * s;
                let v = metric.eval(x, y)?;
                let m = &v.d_alpha_dy * side;
                let eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                samples.push(ConvexitySample { x: x.clone(), y, max_eigenvalue: eig, pass: eig <= EIG_TOL });
            }
        }
    }
    let convex = samples.iter().all(|s| s.pass);
    Ok(ConvexityReport { s0, convex, samples })
}

/// Grid with `ny` y-levels and a handful of x points of the model.
pub fn default_grid(metric: &SplitMetric, y_max: f64, ny: usize) -> GridSpec {
    use super::manifold::ManifoldModel::*;
    let x_samples = match metric.model {
        Circle => vec![vec![0.0], vec![2.0]],
        Torus2 => vec![vec![0.0, 0.0], vec![1.0, 3.0]],
        Sphere2 => vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]],
    };
    GridSpec { y_max, ny, x_samples }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::manifold::ManifoldModel;
    use crate::geometry::metric::MetricFormula;
    use crate::geometry::profile::Profile;

    #[test]
    fn y_independent_alpha_is_convex() {
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 2.0);
        let r = check_convexity(&m, 0.5, &default_grid(&m, 3.0, 20)).unwrap();
        assert!(r.convex);
        assert_eq!(r.violations().count(), 0);
    }

    #[test]
    fn growing_alpha_violates() {
        let m = SplitMetric::new(
            ManifoldModel::Circle,
            Profile::Polynomial { coeffs: vec![1.0, 0.0, 1.0] },
            Profile::constant(1.0),
        );
        let grid = GridSpec { y_max: 3.0, ny: 4, x_samples: vec![vec![0.0]] };
        let r = check_convexity(&m, 1.0, &grid).unwrap();
        assert!(!r.convex);
        let at2 = r.samples.iter().find(|s| (s.y - 2.0).abs() < 1e-12).unwrap();
        assert!(!at2.pass);
        assert!((at2.max_eigenvalue - 4.0).abs() < 1e-12);
        // y < -s0: ∂α = 2y < 0, also a violation
        assert!(r.samples.iter().any(|s| s.y < 0.0 && !s.pass));
        assert!(r.to_lines().contains("fail"));
    }

    #[test]
    fn gaussian_bump_is_convex() {
        let m = SplitMetric::from_formula(
            ManifoldModel::Sphere2,
            &MetricFormula::GaussianBumpAlpha { alpha: 1.0, amp: 1.0, width: 1.0, beta: 1.0 },
        );
        let r = check_convexity(&m, 0.1, &default_grid(&m, 4.0, 50)).unwrap();
        assert!(r.convex);
    }

    #[test]
    fn empty_grid_is_usage_error() {
        let m = SplitMetric::product(ManifoldModel::Circle, 1.0, 1.0);
        let g = GridSpec { y_max: 2.0, ny: 0, x_samples: vec![vec![0.0]] };
        assert!(matches!(check_convexity(&m, 1.0, &g), Err(Error::Usage(_))));
    }
}
