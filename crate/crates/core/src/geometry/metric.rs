use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::manifold::ManifoldModel;
use super::profile::{Profile, Psi};
use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Built-in catalog of split metrics h = A(y)·g − B(y)·dy².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "kebab-case")]
pub enum MetricFormula {
    Product {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
    },
    /// A = alpha, B = beta + amp·cos(freq·y)
    CosPerturbedBeta {
        #[serde(default = "one")]
        alpha: f64,
        #[serde(default = "one")]
        beta: f64,
        amp: f64,
        #[serde(default = "one")]
        freq: f64,
    },
    /// A = alpha + amp·exp(−(y/width)²), B = beta
    GaussianBumpAlpha {
        #[serde(default = "one")]
        alpha: f64,
        amp: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        beta: f64,
    },
    /// Polynomial-in-y coefficients, lowest degree first.
    Polynomial { alpha_coeffs: Vec<f64>, beta_coeffs: Vec<f64> },
}

impl MetricFormula {
    pub fn profiles(&self) -> (Profile, Profile) {
        match self {
            MetricFormula::Product { alpha, beta } => (Profile::constant(*alpha), Profile::constant(*beta)),
            MetricFormula::CosPerturbedBeta { alpha, beta, amp, freq } => {
                (Profile::constant(*alpha), Profile::Cosine { base: *beta, amp: *amp, freq: *freq })
            }
            MetricFormula::GaussianBumpAlpha { alpha, amp, width, beta } => {
                (Profile::Gaussian { base: *alpha, amp: *amp, width: *width }, Profile::constant(*beta))
            }
            MetricFormula::Polynomial { alpha_coeffs, beta_coeffs } => (
                Profile::Polynomial { coeffs: alpha_coeffs.clone() },
                Profile::Polynomial { coeffs: beta_coeffs.clone() },
            ),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MetricFormula::Product { .. } => "product",
            MetricFormula::CosPerturbedBeta { .. } => "cos-perturbed-beta",
            MetricFormula::GaussianBumpAlpha { .. } => "gaussian-bump-alpha",
            MetricFormula::Polynomial { .. } => "polynomial",
        }
    }
}

/// Split Lorentzian metric on X × ℝ with α = A(y)·I and β = B(y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetric {
    pub model: ManifoldModel,
    pub alpha: Profile,
    pub beta: Profile,
    /// Catalog identifier and parameters the metric was built from.
    pub provenance: String,
}

/// Values of α, β and their y-derivatives at one point, α and ∂ᵧα as
/// matrices in an orthonormal tangent frame.
#[derive(Debug, Clone)]
pub struct MetricValues {
    pub alpha: DMatrix<f64>,
    pub beta: f64,
    pub d_alpha_dy: DMatrix<f64>,
    pub d_beta_dy: f64,
}

/// Scalar evaluation used in the inner loops: (A, A′, A″, B, B′, B″).
#[derive(Debug, Clone, Copy)]
pub struct Coeffs {
    pub a: f64,
    pub a1: f64,
    pub a2: f64,
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
}

impl SplitMetric {
    pub fn new(model: ManifoldModel, alpha: Profile, beta: Profile) -> Self {
        SplitMetric { model, alpha, beta, provenance: "custom".into() }
    }

    pub fn from_formula(model: ManifoldModel, formula: &MetricFormula) -> Self {
        let (alpha, beta) = formula.profiles();
        SplitMetric {
            model,
            alpha,
            beta,
            provenance: format!("{}:{}", formula.name(), serde_json::to_string(formula).unwrap_or_default()),
        }
    }

    pub fn product(model: ManifoldModel, alpha: f64, beta: f64) -> Self {
        Self::from_formula(model, &MetricFormula::Product { alpha, beta })
    }

    #[inline]
    pub fn coeffs(&self, y: f64) -> Coeffs {
        let (a, a1, a2) = self.alpha.eval(y);
        let (b, b1, b2) = self.beta.eval(y);
        Coeffs { a, a1, a2, b, b1, b2 }
    }

    /// The metric (α, β + μ).
    pub fn shifted(&self, mu: f64) -> SplitMetric {
        SplitMetric {
            model: self.model,
            alpha: self.alpha.clone(),
            beta: self.beta.shifted(mu),
            provenance: format!("{}+shift({mu})", self.provenance),
        }
    }

    /// α and β independent of y.
    pub fn is_product(&self) -> bool {
        self.alpha.is_constant() && self.beta.is_constant()
    }

    /// Evaluates α, β and their y-derivatives at (x, y).
    pub fn eval(&self, x: &[f64], y: f64) -> Result<MetricValues> {
        self.model.validate_point(x)?;
        if !y.is_finite() {
            return Err(Error::Domain(format!("non-finite y = {y}")));
        }
        let c = self.coeffs(y);
        if !(c.b > 0.0) || !(c.a > 0.0) {
            return Err(Error::Domain(format!("metric not Lorentzian at y = {y}: A = {}, B = {}", c.a, c.b)));
        }
        let n = self.model.dim();
        Ok(MetricValues {
            alpha: DMatrix::identity(n, n) * c.a,
            beta: c.b,
            d_alpha_dy: DMatrix::identity(n, n) * c.a1,
            d_beta_dy: c.b1,
        })
    }

    /// Sup-norm distance of α and β to another metric, sampled on [−ymax, ymax].
    pub fn sup_distance(&self, other: &SplitMetric, ymax: f64, samples: usize) -> (f64, f64) {
        let mut da: f64 = 0.0;
        let mut db: f64 = 0.0;
        for i in 0..=samples {
            let y = -ymax + 2.0 * ymax * i as f64 / samples as f64;
            da = da.max((self.alpha.value(y) - other.alpha.value(y)).abs());
            db = db.max((self.beta.value(y) - other.beta.value(y)).abs());
        }
        (da, db)
    }
}

/// Which constant the cutoff blends α towards outside the slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BlendVariant {
    /// ψα + (1 − ψ)α̲I
    #[default]
    Floor,
    /// ψα + (1 − ψ)ᾱI
    Ceiling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiSpec {
    pub inner: f64,
    pub outer: f64,
    #[serde(default)]
    pub variant: BlendVariant,
}

impl PsiSpec {
    /// The standard ramp on [s₀, s₀ + 1].
    pub fn standard(s0: f64) -> Self {
        PsiSpec { inner: s0, outer: s0 + 1.0, variant: BlendVariant::Floor }
    }
}

/// Replaces (α, β) by (ψα + (1−ψ)cI, ψβ + (1−ψ)β̲) with c = α̲ (floor
/// variant) or ᾱ (ceiling variant).
pub fn apply_slab_cutoff(
    metric: &SplitMetric,
    bounds: &super::bounds::GammaBounds,
    psi: &PsiSpec,
) -> Result<SplitMetric> {
    let s0 = bounds.s0;
    if !(psi.inner < psi.outer) {
        return Err(Error::Usage(format!("cutoff ramp needs inner < outer, got [{}, {}]", psi.inner, psi.outer)));
    }
    if psi.inner < s0 - 1e-15 {
        return Err(Error::Usage(format!("cutoff must equal 1 on [-s0, s0]; inner {} < s0 {s0}", psi.inner)));
    }
    if psi.outer > s0 + 1.0 + 1e-15 {
        return Err(Error::Usage(format!(
            "cutoff must vanish outside [-s0-1, s0+1]; outer {} > {}",
            psi.outer,
            s0 + 1.0
        )));
    }
    let ramp = Psi { inner: psi.inner, outer: psi.outer };
    let floor_alpha = match psi.variant {
        BlendVariant::Floor => bounds.alpha_lo,
        BlendVariant::Ceiling => bounds.alpha_hi,
    };
    Ok(SplitMetric {
        model: metric.model,
        alpha: Profile::Blend { inner: Box::new(metric.alpha.clone()), floor: floor_alpha, psi: ramp },
        beta: Profile::Blend { inner: Box::new(metric.beta.clone()), floor: bounds.beta_lo, psi: ramp },
        provenance: format!("{}+cutoff({:?})", metric.provenance, psi.variant),
    })
}
