use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complex::{Coefficients, ComplexSettings, OrbitSearch};
use crate::error::{Error, Result};
use crate::geodesics::bvp::{EndpointPair, SearchSpec};
use crate::geometry::bounds::{estimate_inputs, GammaBounds};
use crate::geometry::manifold::ManifoldModel;
use crate::geometry::metric::{apply_slab_cutoff, MetricFormula, PsiSpec, SplitMetric};
use crate::index::DEFAULT_MESH;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub s0: f64,
    /// Overrides the sampled (a, b) of the convexity condition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Blend the metric to a product outside the slab.
    #[serde(default)]
    pub cutoff: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComplexSection {
    pub mesh: usize,
    pub coefficients: Coefficients,
    pub orbits: OrbitSearch,
}

impl Default for ComplexSection {
    fn default() -> Self {
        ComplexSection { mesh: DEFAULT_MESH, coefficients: Coefficients::Mod2, orbits: OrbitSearch::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 1, output_dir: PathBuf::from("out") }
    }
}

/// A complete pipeline configuration, stored as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldModel,
    pub metric: MetricFormula,
    pub endpoints: EndpointPair,
    pub bounds: BoundsSection,
    #[serde(default)]
    pub search: SearchSpec,
    #[serde(default)]
    pub complex: ComplexSection,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.search;
        let o = &self.complex.orbits;
        let positive = [
            ("bounds.s0", self.bounds.s0),
            ("search.energy_cap", s.energy_cap),
            ("search.tolerance", s.tolerance),
            ("search.dedup_radius", s.dedup_radius),
            ("complex.orbits.eps", o.eps),
            ("complex.orbits.level_frac", o.level_frac),
            ("complex.orbits.near_frac", o.near_frac),
            ("complex.orbits.merge_frac", o.merge_frac),
            ("complex.orbits.fd_step", o.fd_step),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive, got {v}")));
        }
        for (name, v) in [("bounds.a", self.bounds.a), ("bounds.b", self.bounds.b)] {
            if v.is_some_and(|v| !(v >= 0.0)) {
                return Err(Error::Config(format!("{name} must be non-negative")));
            }
        }
        if self.complex.mesh < crate::index::hessian::MIN_MESH {
            return Err(Error::Config(format!("complex.mesh must be at least {}", crate::index::hessian::MIN_MESH)));
        }
        self.endpoints.validate(self.manifold, self.bounds.s0)
    }

    pub fn base_metric(&self) -> SplitMetric {
        SplitMetric::from_formula(self.manifold, &self.metric)
    }

    /// The metric actually used (cut off outside the slab when asked) and
    /// its Γ bounds.
    pub fn metric_and_bounds(&self) -> Result<(SplitMetric, GammaBounds)> {
        let base = self.base_metric();
        let mut inputs = estimate_inputs(&base, self.bounds.s0, None);
        if let Some(a) = self.bounds.a {
            inputs.a = a;
        }
        if let Some(b) = self.bounds.b {
            inputs.b = b;
        }
        let bounds = GammaBounds::derive(&inputs, self.endpoints.y0, self.endpoints.y1)?;
        let metric = if self.bounds.cutoff {
            apply_slab_cutoff(&base, &bounds, &PsiSpec::standard(self.bounds.s0))?
        } else {
            base
        };
        Ok((metric, bounds))
    }

    pub fn complex_settings(&self) -> ComplexSettings {
        ComplexSettings {
            mesh: self.complex.mesh,
            coefficients: self.complex.coefficients,
            bvp: self.search.clone(),
            orbits: OrbitSearch { seed: self.run.seed, ..self.complex.orbits },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CYL: &str = r#"
manifold = "circle"

[metric]
formula = "product"

[endpoints]
x0 = [0.0]
y0 = 0.0
x1 = [1.5707963267948966]
y1 = 0.3

[bounds]
s0 = 1.0

[search]
energy_cap = 30.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::parse(CYL).unwrap();
        assert_eq!(c.manifold, ManifoldModel::Circle);
        assert_eq!(c.search.energy_cap, 30.0);
        assert_eq!(c.complex.mesh, DEFAULT_MESH);
        let again = RunConfig::parse(&c.to_toml().unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_s0_is_named() {
        let text = CYL.replace("s0 = 1.0", "");
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("s0"), "{e}");
    }

    #[test]
    fn rejects_bad_values() {
        let e = RunConfig::parse(&CYL.replace("energy_cap = 30.0", "energy_cap = -1.0")).unwrap_err();
        assert!(e.to_string().contains("search.energy_cap"));
        let e = RunConfig::parse(&CYL.replace("y1 = 0.3", "y1 = 1.5")).unwrap_err();
        assert!(matches!(e, Error::EndpointOutsideSlab { .. }));
    }
}
