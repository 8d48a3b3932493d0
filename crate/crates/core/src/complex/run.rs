use serde::{Deserialize, Serialize};

use super::chain::{build_path_complex, Coefficients, MorseComplexData};
use super::homology::{compute_homology, HomologyResult};
use super::orbits::OrbitSearch;
use crate::error::{Error, Result};
use crate::geodesics::bvp::{solve_bvp, EndpointPair, GeodesicRecord, SearchSpec};
use crate::geometry::bounds::GammaBounds;
use crate::geometry::metric::SplitMetric;
use crate::index::certify::{certify_nonconjugate, index_records, DEFAULT_MESH};
use crate::pathflow::field::FlowConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexSettings {
    pub mesh: usize,
    pub coefficients: Coefficients,
    pub bvp: SearchSpec,
    pub orbits: OrbitSearch,
}

impl Default for ComplexSettings {
    fn default() -> Self {
        ComplexSettings {
            mesh: DEFAULT_MESH,
            coefficients: Coefficients::Mod2,
            bvp: SearchSpec::default(),
            orbits: OrbitSearch::default(),
        }
    }
}

pub struct ComplexRun {
    pub records: Vec<GeodesicRecord>,
    pub complex: MorseComplexData,
    pub homology: HomologyResult,
}

/// Geodesics under the cap, certified and indexed, then their Morse
/// complex and its homology.
pub fn run_complex(
    metric: &SplitMetric,
    ends: &EndpointPair,
    bounds: &GammaBounds,
    settings: &ComplexSettings,
) -> Result<ComplexRun> {
    let mut records = solve_bvp(metric, ends, bounds, &settings.bvp)?;
    let cert = certify_nonconjugate(metric, &records)?;
    if !cert.pass {
        return Err(Error::DegenerateEndpoint(cert.diagnosis()));
    }
    index_records(metric, &mut records, settings.mesh);
    let cfg = FlowConfig::from_bounds(bounds);
    let complex = build_path_complex(
        metric,
        &records,
        settings.mesh,
        &cfg,
        &settings.orbits,
        settings.coefficients,
        settings.bvp.energy_cap,
    )?;
    let homology = compute_homology(&complex);
    Ok(ComplexRun { records, complex, homology })
}
