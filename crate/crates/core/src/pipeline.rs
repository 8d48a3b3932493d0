use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::complex::{
    build_path_complex, compare_reference, compute_homology, ComparisonReport, HomologyResult, MorseComplexData,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geodesics::bvp::{solve_bvp, EndpointPair, GeodesicRecord, SearchSpec};
use crate::geodesics::stima::{verify_stima, verify_stima2, BoundReport};
use crate::geometry::bounds::GammaBounds;
use crate::geometry::metric::SplitMetric;
use crate::index::{certify_nonconjugate, index_records, Certificate};
use crate::pathflow::field::FlowConfig;

/// Slack below which a bound check counts as violated.
pub const BOUND_TOL: f64 = 1e-8;

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Geodesic records together with the problem they solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsFile {
    pub config: RunConfig,
    pub records: Vec<GeodesicRecord>,
    /// Direct a-priori inequalities on every record.
    pub bound_report: BoundReport,
}

impl RecordsFile {
    pub fn find(config: &RunConfig) -> Result<RecordsFile> {
        config.validate()?;
        let (metric, bounds) = config.metric_and_bounds()?;
        let records = solve_bvp(&metric, &config.endpoints, &bounds, &config.search)?;
        let mut bound_report = BoundReport::default();
        for r in &records {
            bound_report.extend(verify_stima(&metric, r, &bounds)?);
        }
        Ok(RecordsFile { config: config.clone(), records, bound_report })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub manifold: String,
    pub metric: String,
    pub generators: usize,
    pub window: Option<i64>,
    /// (degree, Betti) inside the window.
    pub betti: Vec<(i64, usize)>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub artifacts: Vec<String>,
}

/// Geodesics of the shifted metric (α, β + μ) under the same cap.
pub fn shifted_records(
    metric: &SplitMetric,
    ends: &EndpointPair,
    bounds: &GammaBounds,
    spec: &SearchSpec,
    mu: f64,
) -> Result<Vec<GeodesicRecord>> {
    let mut inputs = bounds.inputs();
    inputs.beta_lo += mu;
    inputs.beta_hi += mu;
    let b = GammaBounds::derive(&inputs, ends.y0, ends.y1)?;
    solve_bvp(&metric.shifted(mu), ends, &b, spec)
}

/// Both a-priori checks on a record set: the direct inequalities on every
/// geodesic and the shifted floor for μ ∈ {0, λ/2, λ}.
pub fn bound_checks(
    metric: &SplitMetric,
    ends: &EndpointPair,
    bounds: &GammaBounds,
    spec: &SearchSpec,
    records: &[GeodesicRecord],
) -> Result<BoundReport> {
    let mut report = BoundReport::default();
    for r in records {
        report.extend(verify_stima(metric, r, bounds)?);
    }
    let lam = bounds.lambda;
    let mut by_shift = vec![(0.0, records.to_vec())];
    for mu in [0.5 * lam, lam] {
        by_shift.push((mu, shifted_records(metric, ends, bounds, spec, mu)?));
    }
    report.extend(verify_stima2(metric, bounds, &by_shift)?);
    Ok(report)
}

struct Stages<'a> {
    dir: &'a Path,
    resume: bool,
    done: Vec<String>,
}

impl Stages<'_> {
    /// Runs (or with resume, reloads) one stage and stores its artifact.
    fn run<T, F>(&mut self, stage: &str, file: &str, f: F) -> Result<T>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        let path = self.dir.join(file);
        if self.resume && path.exists() {
            log::info!("{stage}: reusing {}", path.display());
            let v = read_json(&path).map_err(|e| self.fail(stage, e))?;
            self.done.push(file.to_string());
            return Ok(v);
        }
        let t = std::time::Instant::now();
        let v = f().map_err(|e| self.fail(stage, e))?;
        write_json(&path, &v).map_err(|e| self.fail(stage, e))?;
        log::info!("{stage}: {:.2?}", t.elapsed());
        self.done.push(file.to_string());
        Ok(v)
    }

    fn fail(&self, stage: &str, e: Error) -> Error {
        Error::Stage { stage: stage.to_string(), completed: self.done.clone(), source: Box::new(e) }
    }
}

fn check(name: &str, pass: bool, detail: String) -> Check {
    Check { name: name.to_string(), pass, detail }
}

/// enumerate → certify → index → bounds → complex → homology → compare.
/// Artifacts go to `dir`; with `resume`, existing ones are reused.
pub fn run_pipeline(cfg: &RunConfig, dir: &Path, resume: bool) -> Result<Summary> {
    cfg.validate()?;
    let (metric, bounds) = cfg.metric_and_bounds()?;
    let settings = cfg.complex_settings();
    let mut st = Stages { dir, resume, done: Vec::new() };
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("bounds.json"), &bounds)?;
    let records: Vec<GeodesicRecord> =
        st.run("enumerate", "records.json", || solve_bvp(&metric, &cfg.endpoints, &bounds, &cfg.search))?;
    let cert: Certificate = st.run("certify", "certificate.json", || certify_nonconjugate(&metric, &records))?;
    if !cert.pass {
        return Err(st.fail("certify", Error::DegenerateEndpoint(cert.diagnosis())));
    }
    let indexed: Vec<GeodesicRecord> = st.run("index", "indexed.json", || {
        let mut r = records.clone();
        index_records(&metric, &mut r, settings.mesh);
        Ok(r)
    })?;
    let report: BoundReport = st
        .run("bounds", "bound_checks.json", || bound_checks(&metric, &cfg.endpoints, &bounds, &cfg.search, &records))?;
    std::fs::write(dir.join("bound_checks.csv"), report.to_csv())?;
    let complex: MorseComplexData = st.run("complex", "complex.json", || {
        if indexed.iter().any(|r| r.index.as_ref().is_none_or(|i| i.i_disc.is_none())) {
            return Err(Error::Numerical("some records have no discrete index".into()));
        }
        build_path_complex(
            &metric,
            &indexed,
            settings.mesh,
            &FlowConfig::from_bounds(&bounds),
            &settings.orbits,
            settings.coefficients,
            cfg.search.energy_cap,
        )
    })?;
    complex.check_square_zero().map_err(|e| st.fail("complex", e))?;
    let homology: HomologyResult = st.run("homology", "homology.json", || Ok(compute_homology(&complex)))?;
    let comparison: ComparisonReport =
        st.run("compare", "comparison.json", || Ok(compare_reference(&homology, cfg.manifold)))?;

    let agree = indexed.iter().filter(|r| r.index.as_ref().is_some_and(|i| i.agreement)).count();
    let stable = indexed
        .iter()
        .filter(|r| r.index.as_ref().is_some_and(|i| i.i_disc.is_some() && i.i_disc == i.i_disc_refined))
        .count();
    let violations = report.violations(BOUND_TOL);
    let checks = vec![
        check("certify_nonconjugate", cert.pass, cert.diagnosis()),
        check(
            "index_agreement",
            agree == indexed.len(),
            format!("{agree}/{} records with i_con = i_disc", indexed.len()),
        ),
        check(
            "mesh_stability",
            stable == indexed.len(),
            format!("{stable}/{} records stable under N → 2N", indexed.len()),
        ),
        check("bounds", violations == 0, format!("{violations} of {} checks violated", report.checks.len())),
        check("square_zero", true, format!("{} boundary matrices", complex.boundary.len())),
        check(
            "orbit_stability",
            complex.unstable_pairs.is_empty(),
            format!("{} unstable pairs", complex.unstable_pairs.len()),
        ),
        check(
            "morse_inequalities",
            comparison.rows.iter().all(|r| r.morse_inequality),
            "c_k ≥ b_k in the window".into(),
        ),
        check("reference", comparison.pass, comparison.note.clone().unwrap_or_else(|| "matches the loop space".into())),
    ];
    let mut artifacts = st.done.clone();
    artifacts.push("bound_checks.csv".into());
    artifacts.push("summary.json".into());
    let summary = Summary {
        manifold: cfg.manifold.name().to_string(),
        metric: metric.provenance.clone(),
        generators: complex.generators.len(),
        window: homology.window,
        betti: homology.window_degrees().map(|d| (d.degree, d.betti)).collect(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        artifacts,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

pub fn output_dir(cfg: &RunConfig, overrides: Option<PathBuf>) -> PathBuf {
    overrides.unwrap_or_else(|| cfg.run.output_dir.clone())
}
