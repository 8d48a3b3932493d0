use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_geomorse"));
    c.env_remove("GEOMORSE_OUT");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cyl = config("cylinder.toml");
    let rec = dir.path().join("records.json");
    let idx = dir.path().join("indexed.json");
    let cx = dir.path().join("complex.json");
    assert_eq!(run(&["geodesics", "find", "--config", s(&cyl), "--out", s(&rec)]).status.code(), Some(0));
    let file: serde_json::Value = serde_json::from_slice(&std::fs::read(&rec).unwrap()).unwrap();
    let energies: Vec<f64> =
        file["records"].as_array().unwrap().iter().map(|r| r["energy"].as_f64().unwrap()).collect();
    assert_eq!(energies.len(), 2);

    assert_eq!(run(&["index", "--records", s(&rec), "--mesh", "32", "--out", s(&idx)]).status.code(), Some(0));
    let csv = run(&["bounds", "verify", "--records", s(&idx)]);
    assert_eq!(csv.status.code(), Some(0));
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("record_id,inequality,lhs,rhs,slack\n"));

    assert_eq!(
        run(&["complex", "build", "--records", s(&idx), "--coeff", "z", "--out", s(&cx)]).status.code(),
        Some(0)
    );
    let h = run(&["homology", "--complex", s(&cx)]);
    let h: serde_json::Value = serde_json::from_slice(&h.stdout).unwrap();
    assert_eq!(h["degrees"][0]["betti"], 2);
    assert_eq!(run(&["compare", "--complex", s(&cx), "--reference", "circle"]).status.code(), Some(0));
    // the cylinder complex has two components, the sphere reference one
    assert_eq!(run(&["compare", "--complex", s(&cx), "--reference", "sphere2"]).status.code(), Some(1));
}

#[test]
fn pipeline_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["pipeline", "--config", s(&config("cylinder.toml"))])
        .env("GEOMORSE_OUT", dir.path().join("cyl"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("cyl/summary.json").exists());

    let anti =
        run(&["pipeline", "--config", s(&config("sphere_antipodal.toml")), "--out-dir", s(&dir.path().join("anti"))]);
    assert_eq!(anti.status.code(), Some(3));
    let err = String::from_utf8(anti.stderr).unwrap();
    assert!(err.contains("certify") && err.contains("conjugate"), "{err}");

    let text = std::fs::read_to_string(config("cylinder.toml")).unwrap().replace("s0 = 1.0", "");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text).unwrap();
    let out = run(&["pipeline", "--config", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("s0"));

    assert_eq!(run(&["homology", "--complex", s(&dir.path().join("missing.json"))]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn selftest_and_campaign() {
    let out = run(&["flow", "selftest", "--cases", "5000", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["hilvec"]["failures"], 0);

    let dir = tempfile::tempdir().unwrap();
    let cyl = config("cylinder.toml");
    let args = ["campaign", "--config", s(&cyl), "--n", "2", "--seed", "4"];
    let a = bin().args(args).args(["--out-dir", s(&dir.path().join("a"))]).output().unwrap();
    let b = bin().args(args).args(["--out-dir", s(&dir.path().join("b"))]).output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    let ca = std::fs::read(dir.path().join("a/campaign.csv")).unwrap();
    assert_eq!(ca, std::fs::read(dir.path().join("b/campaign.csv")).unwrap());
}
