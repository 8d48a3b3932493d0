use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::orbits::{find_flow_lines, OrbitSearch, PairCensus};
use super::snf::matmul;
use super::system::{CriticalPoint, MorseSystem};
use crate::error::{Error, Result};
use crate::geodesics::bvp::GeodesicRecord;
use crate::geometry::metric::SplitMetric;
use crate::index::hessian::refine_critical;
use crate::pathflow::field::FlowConfig;
use crate::pathflow::flow::{FlowOptions, FlowSystem, PathSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Coefficients {
    #[serde(rename = "z")]
    Integer,
    #[default]
    #[serde(rename = "z2")]
    Mod2,
}

impl std::str::FromStr for Coefficients {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "z" | "Z" => Ok(Coefficients::Integer),
            "z2" | "Z2" => Ok(Coefficients::Mod2),
            _ => Err(Error::Usage(format!("unknown coefficient mode {s:?} (z or z2)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub degree: i64,
    pub energy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub winding: Option<Vec<i64>>,
}

/// ∂_k with rows indexed by degree k−1 and columns by degree k generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMatrix {
    pub degree: i64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub entries: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MorseComplexData {
    pub coefficients: Coefficients,
    pub energy_cap: f64,
    /// Sorted by degree, then energy.
    pub generators: Vec<Generator>,
    pub boundary: Vec<BoundaryMatrix>,
    pub census: Vec<PairCensus>,
    /// Pairs whose orbit count moved under the seed perturbations.
    pub unstable_pairs: Vec<(usize, usize)>,
}

impl MorseComplexData {
    pub fn degrees(&self) -> Vec<i64> {
        let mut d: Vec<i64> = self.generators.iter().map(|g| g.degree).collect();
        d.dedup();
        d
    }

    pub fn rank(&self, degree: i64) -> usize {
        self.generators.iter().filter(|g| g.degree == degree).count()
    }

    pub fn boundary_at(&self, degree: i64) -> Option<&BoundaryMatrix> {
        self.boundary.iter().find(|b| b.degree == degree)
    }

    /// Reduction of every entry modulo 2.
    pub fn mod2(&self) -> MorseComplexData {
        let mut c = self.clone();
        c.coefficients = Coefficients::Mod2;
        for b in &mut c.boundary {
            b.entries.iter_mut().flatten().for_each(|v| *v = v.rem_euclid(2));
        }
        c
    }

    pub fn check_square_zero(&self) -> Result<()> {
        for hi in &self.boundary {
            let Some(lo) = self.boundary_at(hi.degree - 1) else {
                continue;
            };
            let prod = matmul(&lo.entries, &hi.entries)
                .ok_or_else(|| Error::Contract(format!("∂_{} and ∂_{} do not compose", hi.degree - 1, hi.degree)))?;
            for (row, r) in prod.iter().enumerate() {
                for (col, v) in r.iter().enumerate() {
                    let bad = match self.coefficients {
                        Coefficients::Integer => *v != 0,
                        Coefficients::Mod2 => v.rem_euclid(2) != 0,
                    };
                    if bad {
                        return Err(Error::Integrity { degree: hi.degree as i32, row, col });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds ∂ from a pair census: signed counts over ℤ, orbit parities over
/// ℤ/2. Fails with an integrity error when ∂∘∂ ≠ 0.
pub fn assemble_boundary(
    mut generators: Vec<Generator>,
    census: Vec<PairCensus>,
    coefficients: Coefficients,
    energy_cap: f64,
) -> Result<MorseComplexData> {
    generators.sort_by(|a, b| a.degree.cmp(&b.degree).then(a.energy.total_cmp(&b.energy)).then(a.id.cmp(&b.id)));
    let lookup: BTreeMap<(usize, usize), &PairCensus> = census.iter().map(|c| ((c.from, c.to), c)).collect();
    let mut by_degree: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for g in &generators {
        by_degree.entry(g.degree).or_default().push(g.id);
    }
    let mut boundary = Vec::new();
    for (&k, cols) in &by_degree {
        let Some(rows) = by_degree.get(&(k - 1)) else {
            continue;
        };
        let entries = rows
            .iter()
            .map(|r| {
                cols.iter()
                    .map(|c| match lookup.get(&(*c, *r)) {
                        None => 0,
                        Some(p) => match coefficients {
                            Coefficients::Integer => p.signed_count,
                            Coefficients::Mod2 => (p.orbits.len() % 2) as i64,
                        },
                    })
                    .collect()
            })
            .collect();
        boundary.push(BoundaryMatrix { degree: k, rows: rows.clone(), cols: cols.clone(), entries });
    }
    let unstable_pairs = census.iter().filter(|c| !c.stable).map(|c| (c.from, c.to)).collect();
    let data = MorseComplexData { coefficients, energy_cap, generators, boundary, census, unstable_pairs };
    data.check_square_zero()?;
    Ok(data)
}

/// Orbit census over every pair of adjacent degrees, searched in parallel.
pub fn census<S: MorseSystem>(
    sys: &S,
    points: &[CriticalPoint],
    opts: &FlowOptions,
    search: &OrbitSearch,
) -> Result<Vec<PairCensus>> {
    let pairs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..points.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| points[i].degree == points[j].degree + 1)
        .collect();
    pairs.par_iter().map(|&(i, j)| find_flow_lines(sys, &points[i], &points[j], points, opts, search)).collect()
}

pub fn build_complex<S: MorseSystem>(
    sys: &S,
    points: &[CriticalPoint],
    opts: &FlowOptions,
    search: &OrbitSearch,
    coefficients: Coefficients,
    energy_cap: f64,
) -> Result<MorseComplexData> {
    let gens =
        points.iter().map(|p| Generator { id: p.id, degree: p.degree, energy: p.energy, winding: None }).collect();
    assemble_boundary(gens, census(sys, points, opts, search)?, coefficients, energy_cap)
}

/// Discrete critical points at mesh N for indexed records of one winding
/// class, on the path system through the first of them.
pub fn path_critical_points<'a>(
    metric: &'a SplitMetric,
    records: &[&GeodesicRecord],
    mesh: usize,
    cfg: &FlowConfig,
) -> Result<(PathSystem<'a>, Vec<CriticalPoint>)> {
    if records.is_empty() {
        return Err(Error::Usage("no records in this class".into()));
    }
    let paths = records
        .par_iter()
        .map(|r| refine_critical(metric, &r.sample(metric, mesh)?, 1e-11))
        .collect::<Result<Vec<_>>>()?;
    let sys = PathSystem::new(metric, &paths[0], cfg);
    let mut points = Vec::with_capacity(records.len());
    for (r, p) in records.iter().zip(&paths) {
        let degree = r
            .index
            .as_ref()
            .and_then(|i| i.i_disc)
            .ok_or_else(|| Error::Contract(format!("record {} has no index", r.id)))?;
        let mut s = p.to_flat();
        sys.project(&mut s);
        points.push(CriticalPoint::new(&sys, r.id, degree, s)?);
    }
    Ok((sys, points))
}

/// The Morse complex of indexed geodesic records: classes of different
/// winding are separate path components and never exchange orbits.
pub fn build_path_complex(
    metric: &SplitMetric,
    records: &[GeodesicRecord],
    mesh: usize,
    cfg: &FlowConfig,
    search: &OrbitSearch,
    coefficients: Coefficients,
    energy_cap: f64,
) -> Result<MorseComplexData> {
    let mut classes: BTreeMap<Option<Vec<i64>>, Vec<&GeodesicRecord>> = BTreeMap::new();
    for r in records {
        classes.entry(r.winding.clone()).or_default().push(r);
    }
    let opts = FlowOptions::from(cfg);
    let mut gens = Vec::new();
    let mut all = Vec::new();
    for (winding, members) in classes {
        for r in &members {
            let degree = r
                .index
                .as_ref()
                .and_then(|i| i.i_disc)
                .ok_or_else(|| Error::Contract(format!("record {} has no index", r.id)))?;
            gens.push(Generator { id: r.id, degree, energy: r.energy, winding: winding.clone() });
        }
        let degrees: Vec<i64> = members.iter().filter_map(|r| r.index.as_ref()?.i_disc).collect();
        let pairs_exist = degrees.iter().any(|d| degrees.contains(&(d - 1)));
        if !pairs_exist {
            continue;
        }
        let (sys, points) = path_critical_points(metric, &members, mesh, cfg)?;
        all.extend(census(&sys, &points, &opts, search)?);
    }
    assemble_boundary(gens, all, coefficients, energy_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::system::Synthetic;

    fn opts() -> FlowOptions {
        FlowOptions { rtol: 1e-9, atol: 1e-11, rest_tol: 1e-9, basin_radius: 1e-4, t_max: 200.0, veto_slack: 1e-13 }
    }

    fn points(s: &Synthetic) -> Vec<CriticalPoint> {
        s.critical_points().into_iter().enumerate().map(|(i, (x, k))| CriticalPoint::new(s, i, k, x).unwrap()).collect()
    }

    #[test]
    fn double_double_well_square_zero() {
        let s = Synthetic::DoubleDoubleWell;
        let pts = points(&s);
        let c = build_complex(&s, &pts, &opts(), &OrbitSearch::default(), Coefficients::Integer, 10.0).unwrap();
        let d1 = c.boundary_at(1).unwrap();
        let d2 = c.boundary_at(2).unwrap();
        assert_eq!((d1.rows.len(), d1.cols.len()), (4, 4));
        assert!(d2.entries.iter().all(|r| r[0].abs() == 1));
        assert!(d1.entries.iter().flatten().filter(|v| **v != 0).count() == 8);
        assert!(c.unstable_pairs.is_empty());
        let m = build_complex(&s, &pts, &opts(), &OrbitSearch::default(), Coefficients::Mod2, 10.0).unwrap();
        assert_eq!(c.mod2().boundary, m.boundary);
    }

    #[test]
    fn broken_census_is_an_integrity_error() {
        let s = Synthetic::DoubleDoubleWell;
        let pts = points(&s);
        let mut cen =
            census(&s, &pts, &opts(), &OrbitSearch { stability_check: false, ..OrbitSearch::default() }).unwrap();
        let i = cen.iter().position(|c| c.signed_count != 0 && pts[c.from].degree == 2).unwrap();
        cen[i].signed_count = 0;
        cen[i].orbits.clear();
        let gens: Vec<Generator> =
            pts.iter().map(|p| Generator { id: p.id, degree: p.degree, energy: p.energy, winding: None }).collect();
        for coeff in [Coefficients::Integer, Coefficients::Mod2] {
            assert!(matches!(
                assemble_boundary(gens.clone(), cen.clone(), coeff, 10.0),
                Err(Error::Integrity { degree: 2, .. })
            ));
        }
    }
}
