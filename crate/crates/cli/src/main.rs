use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geomorse::complex::{
    build_path_complex, compare_reference, compute_homology, perturbation_invariance, Coefficients, MorseComplexData,
};
use geomorse::geometry::manifold::ManifoldModel;
use geomorse::index::index_records;
use geomorse::pathflow::{flow, hilvec_fuzz, lyapunov_suite, DiscretePath, FlowConfig};
use geomorse::pipeline::{bound_checks, read_json, to_json, write_json, RecordsFile, BOUND_TOL};
use geomorse::{run_pipeline, verify_bounds_campaign, Error, Result, RunConfig};

/// Morse theory for geodesics on split Lorentzian manifolds X × ℝ.
#[derive(Parser)]
#[command(name = "geomorse", version)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Random seed; overrides the config's run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for pipeline and campaign artifacts.
    #[arg(long, global = true, env = "GEOMORSE_OUT")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boundary-value geodesic enumeration.
    #[command(subcommand)]
    Geodesics(GeodesicsCmd),
    /// Attach continuous and discrete Morse indices to records.
    Index {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value_t = 32)]
        mesh: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A-priori bound checks.
    #[command(subcommand)]
    Bounds(BoundsCmd),
    /// Pseudo-gradient flow.
    #[command(subcommand)]
    Flow(FlowCmd),
    /// Morse complex assembly.
    #[command(subcommand)]
    Complex(ComplexCmd),
    /// Homology of an assembled complex.
    Homology {
        #[arg(long)]
        complex: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the homology of a complex with the based loop space.
    Compare {
        #[arg(long)]
        complex: PathBuf,
        /// circle, torus2 or sphere2
        #[arg(long)]
        reference: ManifoldModel,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Homology of two nearby metrics.
    Invariance {
        #[arg(long)]
        config0: PathBuf,
        #[arg(long)]
        config1: PathBuf,
        /// Also flow every generator of the first metric under the second.
        #[arg(long)]
        continuation: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// enumerate → certify → index → bounds → complex → homology → compare.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        /// Reuse artifacts already present in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Bound checks over randomly perturbed metrics.
    Campaign {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
}

#[derive(Subcommand)]
enum GeodesicsCmd {
    Find {
        #[arg(long)]
        config: PathBuf,
        /// Overrides search.energy_cap.
        #[arg(long)]
        energy_cap: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BoundsCmd {
    /// CSV of every inequality: record_id,inequality,lhs,rhs,slack.
    Verify {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FlowCmd {
    /// Trajectory log (t, E, E shifted by λ, ‖F‖) from a start path.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// DiscretePath JSON.
        #[arg(long)]
        start: PathBuf,
        /// Flow on the full space instead of relaxing y.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Inequality fuzz and Lyapunov property runs.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 100_000)]
    cases: usize,
    #[arg(long, default_value_t = 12)]
    mesh: usize,
}

#[derive(Subcommand)]
enum ComplexCmd {
    Build {
        #[arg(long)]
        records: PathBuf,
        /// Settings to use instead of the ones stored with the records.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_coeff)]
        coeff: Option<Coefficients>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_coeff(s: &str) -> std::result::Result<Coefficients, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Writes JSON to `out`, or to stdout without one.
fn emit<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            print!("{}", to_json(value)?);
            Ok(())
        }
    }
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    Ok(cfg)
}

/// Ok(true) when every check passed.
fn run(cli: Cli) -> Result<bool> {
    let seed = cli.seed;
    match cli.command {
        Command::Geodesics(GeodesicsCmd::Find { config, energy_cap, out }) => {
            let mut cfg = load_config(&config, seed)?;
            if let Some(c) = energy_cap {
                cfg.search.energy_cap = c;
            }
            let file = RecordsFile::find(&cfg)?;
            log::info!("{} geodesics below E = {}", file.records.len(), cfg.search.energy_cap);
            emit(out.as_deref(), &file)?;
            Ok(true)
        }
        Command::Index { records, mesh, out } => {
            let mut file: RecordsFile = read_json(&records)?;
            if mesh < geomorse::index::hessian::MIN_MESH {
                return Err(Error::Usage(format!("mesh must be at least {}", geomorse::index::hessian::MIN_MESH)));
            }
            let (metric, _) = file.config.metric_and_bounds()?;
            index_records(&metric, &mut file.records, mesh);
            let agree = file.records.iter().all(|r| r.index.as_ref().is_some_and(|i| i.agreement));
            emit(out.as_deref(), &file)?;
            Ok(agree)
        }
        Command::Bounds(BoundsCmd::Verify { records, out }) => {
            let file: RecordsFile = read_json(&records)?;
            let cfg = &file.config;
            let (metric, bounds) = cfg.metric_and_bounds()?;
            let report = bound_checks(&metric, &cfg.endpoints, &bounds, &cfg.search, &file.records)?;
            emit_text(out.as_deref(), &report.to_csv())?;
            let bad = report.violations(BOUND_TOL);
            if bad > 0 {
                log::warn!("{bad} of {} inequalities violated", report.checks.len());
            }
            Ok(bad == 0)
        }
        Command::Flow(FlowCmd::Run { config, start, full, out }) => {
            let cfg = load_config(&config, seed)?;
            let (metric, bounds) = cfg.metric_and_bounds()?;
            let path: DiscretePath = read_json(&start)?;
            let fc = FlowConfig { relax_y: !full, ..FlowConfig::from_bounds(&bounds) };
            let (run, _) = flow(&metric, &path, &fc, &[])?;
            let mut text = String::from("t,energy,energy_shifted,field_norm\n");
            for s in &run.samples {
                let lam = s.e_lam.map_or(String::new(), |v| format!("{v:.16e}"));
                text.push_str(&format!("{:.16e},{:.16e},{lam},{:.16e}\n", s.t, s.e, s.f_norm));
            }
            emit_text(out.as_deref(), &text)?;
            let (a, b) = run.lyapunov_violations(Some(fc.c0 - 1.0), 1e-12);
            Ok(a == 0 && b == 0)
        }
        Command::Flow(FlowCmd::Selftest(args)) => {
            let seed = seed.unwrap_or(1);
            let fuzz = hilvec_fuzz(args.cases, seed)?;
            let cases = lyapunov_suite(seed, args.mesh)?;
            let monotone = cases.iter().all(|c| c.energy_increases == 0 && c.shifted_increases == 0);
            let pass = fuzz.failures == 0 && monotone;
            emit(None, &serde_json::json!({ "hilvec": fuzz, "lyapunov": cases, "pass": pass }))?;
            Ok(pass)
        }
        Command::Complex(ComplexCmd::Build { records, config, coeff, out }) => {
            let file: RecordsFile = read_json(&records)?;
            let cfg = match config {
                Some(p) => load_config(&p, seed)?,
                None => file.config.clone(),
            };
            let (metric, bounds) = cfg.metric_and_bounds()?;
            let mut settings = cfg.complex_settings();
            if let Some(c) = coeff {
                settings.coefficients = c;
            }
            let mut recs = file.records;
            if recs.iter().any(|r| r.index.is_none()) {
                index_records(&metric, &mut recs, settings.mesh);
            }
            let complex = build_path_complex(
                &metric,
                &recs,
                settings.mesh,
                &FlowConfig::from_bounds(&bounds),
                &settings.orbits,
                settings.coefficients,
                cfg.search.energy_cap,
            )?;
            emit(out.as_deref(), &complex)?;
            Ok(complex.unstable_pairs.is_empty())
        }
        Command::Homology { complex, out } => {
            let c: MorseComplexData = read_json(&complex)?;
            c.check_square_zero()?;
            emit(out.as_deref(), &compute_homology(&c))?;
            Ok(true)
        }
        Command::Compare { complex, reference, out } => {
            let c: MorseComplexData = read_json(&complex)?;
            c.check_square_zero()?;
            let report = compare_reference(&compute_homology(&c), reference);
            emit(out.as_deref(), &report)?;
            Ok(report.pass)
        }
        Command::Invariance { config0, config1, continuation, out } => {
            let c0 = load_config(&config0, seed)?;
            let c1 = load_config(&config1, seed)?;
            if c0.manifold != c1.manifold || c0.endpoints != c1.endpoints {
                return Err(Error::Usage("both configs must share manifold and endpoints".into()));
            }
            let (m0, bounds) = c0.metric_and_bounds()?;
            let (m1, _) = c1.metric_and_bounds()?;
            let report =
                perturbation_invariance(&m0, &m1, &bounds, &c0.endpoints, &c0.complex_settings(), continuation)?;
            emit(out.as_deref(), &report)?;
            Ok(report.pass)
        }
        Command::Pipeline { config, resume } => {
            let cfg = load_config(&config, seed)?;
            let dir = geomorse::pipeline::output_dir(&cfg, cli.out_dir);
            let summary = run_pipeline(&cfg, &dir, resume)?;
            for c in &summary.checks {
                eprintln!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            eprintln!("artifacts in {}", dir.display());
            Ok(summary.pass)
        }
        Command::Campaign { config, n } => {
            let cfg = load_config(&config, seed)?;
            let dir = geomorse::pipeline::output_dir(&cfg, cli.out_dir);
            let report = verify_bounds_campaign(&cfg, n, cfg.run.seed)?;
            std::fs::create_dir_all(&dir)?;
            std::fs::write(dir.join("campaign.csv"), report.to_csv())?;
            write_json(&dir.join("campaign.json"), &report)?;
            eprintln!(
                "{} metrics, {} checks, {} violations; artifacts in {}",
                report.metrics.len(),
                report.total_checks,
                report.violations,
                dir.display()
            );
            Ok(report.violations == 0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
