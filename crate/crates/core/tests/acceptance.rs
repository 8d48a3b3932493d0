//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test --release -p geomorse --test acceptance`.

mod common;

use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use geomorse::campaign::{random_formula, verify_bounds_campaign};
use geomorse::complex::{
    build_complex, check_closeness, compute_homology, perturbation_invariance, smith_invariants, to_big, Coefficients,
    CriticalPoint, MorseComplexData, OrbitSearch, Synthetic,
};
use geomorse::geodesics::bvp::{solve_bvp, EndpointPair, GeodesicRecord, SearchSpec};
use geomorse::geometry::bounds::{estimate_inputs, GammaBounds};
use geomorse::geometry::manifold::ManifoldModel;
use geomorse::geometry::metric::{MetricFormula, SplitMetric};
use geomorse::index::{certify_nonconjugate, index_records};
use geomorse::pathflow::{
    energy, gradient, hilvec_bound, hilvec_fuzz, lyapunov_suite, w_inner, DiscretePath, FlowOptions, PathTangent,
};
use geomorse::pipeline::read_json;
use geomorse::{run_pipeline, Error, RunConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{elementary_divisors, expected_homology, scrambled_complex, Elementary, Piece};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s(e: Error) -> String {
    e.to_string()
}

fn config(name: &str) -> RunConfig {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&p).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn cylinder() -> Outcome {
    let cfg = config("cylinder.toml");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let summary = run_pipeline(&cfg, dir.path(), false).map_err(e2s)?;
    let records: Vec<GeodesicRecord> = read_json(&dir.path().join("indexed.json")).map_err(e2s)?;
    // windings k with ((π/2 + 2πk)² − 0.09)/2 ≤ 30
    let mut want: Vec<(i64, f64)> = (-5i64..=5)
        .map(|k| (k, ((PI / 2.0 + 2.0 * PI * k as f64).powi(2) - 0.09) / 2.0))
        .filter(|(_, e)| *e <= cfg.search.energy_cap)
        .collect();
    want.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut got: Vec<(i64, f64)> = records.iter().map(|r| (r.winding.as_ref().unwrap()[0], r.energy)).collect();
    got.sort_by(|a, b| a.1.total_cmp(&b.1));
    ensure(got.len() == want.len(), format!("{} geodesics, expected {}", got.len(), want.len()))?;
    for ((kg, eg), (kw, ew)) in got.iter().zip(&want) {
        ensure(kg == kw && rel(*eg, *ew) <= 1e-8, format!("winding {kg} energy {eg} vs {kw} {ew}"))?;
    }
    for r in &records {
        let i = r.index.as_ref().ok_or("missing index")?;
        ensure(
            i.i_con == Some(0) && i.i_disc == Some(0),
            format!("record {} has index {:?}/{:?}", r.id, i.i_con, i.i_disc),
        )?;
    }
    ensure(summary.betti == vec![(0, want.len())], format!("betti {:?}", summary.betti))?;
    let h: geomorse::complex::HomologyResult = read_json(&dir.path().join("homology.json")).map_err(e2s)?;
    ensure(h.degrees.iter().skip(1).all(|d| d.betti == 0), "higher Betti nonzero")?;
    ensure(
        summary.pass,
        format!("summary checks failed: {:?}", summary.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>()),
    )?;
    Ok(format!(
        "{} windings, max rel energy error {:.1e}",
        got.len(),
        got.iter().zip(&want).map(|(g, w)| rel(g.1, w.1)).fold(0.0, f64::max)
    ))
}

fn sphere() -> Outcome {
    let cfg = config("sphere.toml");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let summary = run_pipeline(&cfg, dir.path(), false).map_err(e2s)?;
    let records: Vec<GeodesicRecord> = read_json(&dir.path().join("indexed.json")).map_err(e2s)?;
    // great-circle arcs of length θ + 2πm or 2π(m+1) − θ; index = multiples of π strictly inside
    let theta = (0.6f64).acos();
    let mut lengths: Vec<f64> =
        (0..4).flat_map(|m| [theta + 2.0 * PI * m as f64, 2.0 * PI * (m + 1) as f64 - theta]).collect();
    lengths.retain(|l| l * l / 2.0 <= cfg.search.energy_cap);
    lengths.sort_by(f64::total_cmp);
    let mut recs: Vec<&GeodesicRecord> = records.iter().collect();
    recs.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    ensure(recs.len() == lengths.len(), format!("{} geodesics, expected {}", recs.len(), lengths.len()))?;
    for (r, l) in recs.iter().zip(&lengths) {
        let idx = (l / PI).ceil() as i64 - 1;
        let i = r.index.as_ref().ok_or("missing index")?;
        ensure(rel(r.energy, l * l / 2.0) <= 1e-8, format!("energy {} vs {}", r.energy, l * l / 2.0))?;
        ensure(i.i_con == Some(idx) && i.i_disc == Some(idx), format!("index {:?}/{:?} vs {idx}", i.i_con, i.i_disc))?;
    }
    let window = summary.window.ok_or("window empty")?;
    ensure(window == 3, format!("window K = {window}"))?;
    let h: geomorse::complex::HomologyResult = read_json(&dir.path().join("homology.json")).map_err(e2s)?;
    for d in h.window_degrees() {
        ensure(
            d.rank == 1 && d.betti == 1 && d.rank >= d.betti,
            format!("degree {}: c = {}, b = {}", d.degree, d.rank, d.betti),
        )?;
    }
    ensure(
        summary.pass,
        format!("summary checks failed: {:?}", summary.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>()),
    )?;
    Ok(format!("K = {window}, Betti {:?}", summary.betti.iter().map(|b| b.1).collect::<Vec<_>>()))
}

fn campaign() -> Outcome {
    let mut parts = Vec::new();
    for name in ["cylinder.toml", "torus.toml"] {
        let cfg = config(name);
        let rep = verify_bounds_campaign(&cfg, 20, 7).map_err(e2s)?;
        for m in &rep.metrics {
            let shifts: std::collections::BTreeSet<&str> = m
                .report
                .checks
                .iter()
                .filter(|c| c.inequality.starts_with("shifted-floor"))
                .map(|c| c.inequality.as_str())
                .collect();
            ensure(shifts.len() == 3, format!("metric {}: shifted checks {shifts:?}", m.metric_id))?;
        }
        ensure(rep.metrics.len() == 20, "metric count")?;
        let worst = rep.metrics.iter().flat_map(|m| &m.report.checks).map(|c| c.slack).fold(f64::INFINITY, f64::min);
        ensure(rep.violations == 0, format!("{name}: {} of {} checks violated", rep.violations, rep.total_checks))?;
        parts.push(format!("{}: {} checks, min slack {worst:.2e}", cfg.manifold.name(), rep.total_checks));
    }
    Ok(parts.join("; "))
}

fn hilvec() -> Outcome {
    let f = hilvec_fuzz(100_000, 11).map_err(e2s)?;
    ensure(f.failures == 0, format!("{} failures, min slack {:e}", f.failures, f.min_slack))?;
    let h = hilvec_bound(&[1.0, 0.0], &[0.0, 1.0], 1.0).map_err(e2s)?;
    ensure((h.lhs, h.rhs, h.theta) == (1.0, 0.25, 0.5), format!("orthogonal case {h:?}"))?;
    let u = [0.5, -2.0, 1.0];
    let uu = 5.25;
    for chi in [0.0, 0.5, 1.0] {
        let h = hilvec_bound(&u, &u, chi).map_err(e2s)?;
        ensure(h.lhs == (1.0 + chi) * uu && h.rhs == 0.5 * uu, format!("u = v case {h:?}"))?;
    }
    let h = hilvec_bound(&[1.0, 2.0], &[-1.0, -2.0], 1.0).map_err(e2s)?;
    ensure(h.lhs == 0.0 && h.rhs == 0.0 && h.holds, format!("u = −v case {h:?}"))?;
    Ok(format!("{} cases, min slack {:.2e}", f.cases, f.min_slack))
}

fn catalog() -> Vec<MetricFormula> {
    vec![
        MetricFormula::Product { alpha: 1.3, beta: 0.8 },
        MetricFormula::CosPerturbedBeta { alpha: 1.0, beta: 1.1, amp: 0.12, freq: 1.7 },
        MetricFormula::GaussianBumpAlpha { alpha: 0.9, amp: 0.3, width: 0.7, beta: 1.0 },
        MetricFormula::Polynomial { alpha_coeffs: vec![1.0, 0.1, 0.05], beta_coeffs: vec![1.0, -0.05, 0.02] },
    ]
}

fn random_point(model: ManifoldModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match model {
        ManifoldModel::Sphere2 => {
            let mut v: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
            v
        }
        m => (0..m.ambient_dim()).map(|_| rng.gen_range(0.0..2.0 * PI)).collect(),
    }
}

fn random_endpoints(model: ManifoldModel, rng: &mut ChaCha8Rng) -> EndpointPair {
    loop {
        let x0 = random_point(model, rng);
        let x1 = random_point(model, rng);
        let d = model.distance(&x0, &x1);
        if d > 0.3 && (model.is_flat() || d < PI - 0.3) {
            return EndpointPair::new(x0, rng.gen_range(-0.4..0.4), x1, rng.gen_range(-0.4..0.4));
        }
    }
}

fn random_tangent(p: &DiscretePath, rng: &mut ChaCha8Rng) -> PathTangent {
    let mut t = PathTangent::zeros(p);
    for k in 1..=p.interior() {
        t.xi[k].iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        t.eta[k] = rng.gen_range(-0.5..0.5);
    }
    t.make_tangent(p);
    t
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let models = [ManifoldModel::Circle, ManifoldModel::Torus2, ManifoldModel::Sphere2];
    let mut worst = 0.0f64;
    let mut count = 0;
    for formula in catalog() {
        for i in 0..100 {
            let model = models[i % 3];
            let metric = SplitMetric::from_formula(model, &formula);
            let ends = random_endpoints(model, &mut rng);
            let n = rng.gen_range(6..=24);
            let base = DiscretePath::straight(model, &ends.x0, ends.y0, &ends.x1, ends.y1, n).map_err(e2s)?;
            let p = base.retract(&random_tangent(&base, &mut rng), 1.0);
            let shift = if i % 2 == 0 { 0.0 } else { 0.7 };
            let g = gradient(&metric, &p, shift).map_err(e2s)?;
            let t = random_tangent(&p, &mut rng);
            let h = 1e-5;
            let fd =
                (energy(&metric, &p.retract(&t, h), shift) - energy(&metric, &p.retract(&t, -h), shift)) / (2.0 * h);
            let an = w_inner(&p, &g, &t).map_err(e2s)?;
            let err = (fd - an).abs() / an.abs().max(1.0);
            worst = worst.max(err);
            count += 1;
            ensure(err <= 1e-6, format!("{} on {}: fd {fd} vs W-gradient {an}", formula.name(), model.name()))?;
        }
    }
    Ok(format!("{count} paths, worst relative error {worst:.1e}"))
}

fn boundary_squares() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // flow-assembled synthetic complexes
    let opts =
        FlowOptions { rtol: 1e-9, atol: 1e-11, rest_tol: 1e-9, basin_radius: 1e-4, t_max: 200.0, veto_slack: 1e-13 };
    let systems = [Synthetic::DoubleWell { c: 1.0 }, Synthetic::DoubleDoubleWell, Synthetic::WellProduct { dim: 3 }];
    let mut assembled: Vec<MorseComplexData> = Vec::new();
    for s in systems {
        let pts: Vec<CriticalPoint> = s
            .critical_points()
            .into_iter()
            .enumerate()
            .map(|(i, (x, k))| CriticalPoint::new(&s, i, k, x).unwrap())
            .collect();
        let c = build_complex(&s, &pts, &opts, &OrbitSearch::default(), Coefficients::Integer, 100.0).map_err(e2s)?;
        let b: Vec<usize> = compute_homology(&c).degrees.iter().map(|d| d.betti).collect();
        ensure(b[0] == 1 && b[1..].iter().all(|v| *v == 0), format!("{s:?}: Betti {b:?}"))?;
        assembled.push(c);
    }
    // algebraic complexes of known homology in scrambled bases
    let mut synthetic = 0;
    for _ in 0..24 {
        let pieces: Vec<Piece> = (0..rng.gen_range(2..8))
            .map(|_| {
                if rng.gen_bool(0.3) {
                    Piece::Free(rng.gen_range(0..=3))
                } else {
                    Piece::Pair(rng.gen_range(1..=3), [1, -1, 2, 3, 4, 6][rng.gen_range(0..6)])
                }
            })
            .collect();
        let ops: Vec<Elementary> = (0..10)
            .map(|_| Elementary {
                i: rng.gen_range(0..8),
                j: rng.gen_range(0..8),
                k: rng.gen_range(-2..=2),
                negate: rng.gen_bool(0.5),
            })
            .collect();
        let top = pieces
            .iter()
            .map(|p| match p {
                Piece::Free(d) | Piece::Pair(d, _) => *d,
            })
            .max()
            .unwrap();
        let c = scrambled_complex(&pieces, &ops, Coefficients::Integer);
        let got: Vec<(usize, Vec<i64>)> = compute_homology(&c)
            .degrees
            .iter()
            .map(|d| (d.betti, d.torsion.iter().map(|t| t.parse().unwrap()).collect()))
            .collect();
        ensure(got == expected_homology(&pieces, top, false), format!("homology {got:?} for {pieces:?}"))?;
        assembled.push(c);
        synthetic += 1;
    }
    for c in &assembled {
        c.check_square_zero().map_err(e2s)?;
    }
    for _ in 0..200 {
        let (r, k) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let f = rng.gen_range(1..=3);
        let m: Vec<Vec<i64>> = (0..r).map(|_| (0..k).map(|_| f * rng.gen_range(-5..=5)).collect()).collect();
        let got: Vec<i128> = smith_invariants(&to_big(&m)).iter().map(|d| d.to_string().parse().unwrap()).collect();
        ensure(got == elementary_divisors(&m), format!("SNF of {m:?}"))?;
    }
    Ok(format!(
        "{} complexes ({} flow-assembled, {synthetic} algebraic), 200 SNF cases",
        assembled.len(),
        systems.len()
    ))
}

fn index_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let models = [ManifoldModel::Circle, ManifoldModel::Torus2, ManifoldModel::Sphere2];
    let (mut instances, mut accepted, mut refused) = (0, 0, 0);
    let mut i = 0;
    while accepted < 50 && i < 60 {
        let model = models[i % 3];
        let formula = random_formula(&mut rng, i);
        i += 1;
        let metric = SplitMetric::from_formula(model, &formula);
        let ends = random_endpoints(model, &mut rng);
        let bounds = GammaBounds::derive(&estimate_inputs(&metric, 1.0, None), ends.y0, ends.y1).map_err(e2s)?;
        let cap = match model {
            ManifoldModel::Torus2 => 8.0,
            _ => 25.0,
        };
        let mut records = solve_bvp(&metric, &ends, &bounds, &SearchSpec { energy_cap: cap, ..SearchSpec::default() })
            .map_err(e2s)?;
        instances += 1;
        if !certify_nonconjugate(&metric, &records).map_err(e2s)?.pass {
            refused += 1;
            continue;
        }
        index_records(&metric, &mut records, 32);
        for r in &records {
            let d = r.index.as_ref().ok_or("missing index")?;
            if !d.certified {
                continue;
            }
            ensure(
                d.i_con.is_some() && d.i_con == d.i_disc,
                format!("{} record {}: i_con {:?}, i_disc {:?}", model.name(), r.id, d.i_con, d.i_disc),
            )?;
            ensure(
                d.i_disc == d.i_disc_refined,
                format!("record {}: i_disc moved {:?} → {:?} under N → 2N", r.id, d.i_disc, d.i_disc_refined),
            )?;
            accepted += 1;
        }
    }
    ensure(accepted >= 50, format!("only {accepted} accepted records"))?;
    Ok(format!("{accepted} records from {instances} instances agree and are mesh-stable ({refused} instances refused)"))
}

fn invariance() -> Outcome {
    let mut parts = Vec::new();
    for (name, cap) in [("cylinder.toml", 30.0), ("sphere.toml", 70.0)] {
        let mut cfg = config(name);
        cfg.search.energy_cap = cap;
        let (m0, bounds) = cfg.metric_and_bounds().map_err(e2s)?;
        let near = RunConfig {
            metric: MetricFormula::CosPerturbedBeta { alpha: 1.0, beta: 1.0, amp: 0.01, freq: 1.0 },
            ..cfg.clone()
        };
        let m1 = near.base_metric();
        let settings = cfg.complex_settings();
        let rep = perturbation_invariance(&m0, &m1, &bounds, &cfg.endpoints, &settings, cfg.manifold.is_flat())
            .map_err(e2s)?;
        ensure(rep.window.is_some(), format!("{name}: empty common window"))?;
        ensure(rep.pass, format!("{name}: degrees {:?}", rep.degrees))?;
        if cfg.manifold.is_flat() {
            ensure(
                rep.continuation.iter().all(|c| c.to.is_some() && c.sign.abs() == 1),
                format!("continuation {:?}", rep.continuation),
            )?;
        }
        let far = MetricFormula::CosPerturbedBeta { alpha: 1.0, beta: 1.0, amp: 2.0 * rep.radius, freq: 1.0 };
        let m2 = SplitMetric::from_formula(cfg.manifold, &far);
        match check_closeness(&m0, &m2, &bounds) {
            Err(Error::Usage(msg)) if msg.contains("admissible radius") => {}
            other => return Err(format!("{name}: far metric not refused: {other:?}")),
        }
        parts.push(format!(
            "{}: window {}, sup |Δβ| {:.3} < {:.3}",
            cfg.manifold.name(),
            rep.window.unwrap(),
            rep.d_beta,
            rep.radius
        ));
    }
    Ok(parts.join("; "))
}

fn lyapunov() -> Outcome {
    let mut runs = 0;
    let mut samples = 0;
    for seed in [1, 2] {
        for c in lyapunov_suite(seed, 12).map_err(e2s)? {
            ensure(c.energy_increases == 0, format!("{}: E increased {} times", c.name, c.energy_increases))?;
            ensure(c.shifted_increases == 0, format!("{}: shifted E increased {} times", c.name, c.shifted_increases))?;
            runs += 1;
            samples += c.samples;
        }
    }
    Ok(format!("{runs} trajectories, {samples} samples"))
}

fn determinism() -> Outcome {
    let mut files = 0;
    for name in ["cylinder.toml", "torus.toml"] {
        let cfg = config(name);
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let sa = run_pipeline(&cfg, a.path(), false).map_err(e2s)?;
        run_pipeline(&cfg, b.path(), false).map_err(e2s)?;
        for f in &sa.artifacts {
            let x = std::fs::read(a.path().join(f)).map_err(|e| e.to_string())?;
            let y = std::fs::read(b.path().join(f)).map_err(|e| e.to_string())?;
            ensure(x == y, format!("{name}: {f} differs between runs"))?;
            files += 1;
        }
        let before = std::fs::read(a.path().join("summary.json")).map_err(|e| e.to_string())?;
        run_pipeline(&cfg, a.path(), true).map_err(e2s)?;
        let after = std::fs::read(a.path().join("summary.json")).map_err(|e| e.to_string())?;
        ensure(before == after, format!("{name}: resumed summary differs"))?;
    }
    Ok(format!("{files} artifacts byte-identical, resume reproduces the summary"))
}

fn main() {
    type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("flat cylinder closed-form geodesics and Ω(S¹)", Some(Duration::from_secs(30)), cylinder),
        ("round S² through degree K = 3", Some(Duration::from_secs(300)), sphere),
        ("a-priori bound campaign on S¹ and T²", Some(Duration::from_secs(600)), campaign),
        ("hilvec fuzz and tagged cases", Some(Duration::from_secs(5)), hilvec),
        ("W-gradient vs finite differences", None, gradients),
        ("∂² = 0 and SNF vs determinantal divisors", None, boundary_squares),
        ("i_con = i_disc and mesh stability", None, index_identity),
        ("C⁰-perturbation invariance and refusal", None, invariance),
        ("Lyapunov monotonicity along flows", None, lyapunov),
        ("pipeline determinism", None, determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let mut result = run();
        let dt = t.elapsed();
        if let (Ok(d), Some(b)) = (&result, budget) {
            if dt > *b {
                result = Err(format!("{d}; took {dt:.1?}, over the {b:?} budget"));
            }
        }
        match &result {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d} [{dt:.1?}]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d} [{dt:.1?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
