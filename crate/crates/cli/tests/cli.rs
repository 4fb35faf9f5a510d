use std::path::PathBuf;
use std::process::{Command, Output};

use tempfile::TempDir;

fn signum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signum")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    signum(args).status.code().expect("exit code")
}

fn spec_file(dir: &TempDir, name: &str, text: &str) -> String {
    let p: PathBuf = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const HARMONIC: &str = "family = power-decay\ncoeffs = 1\nexponents = 1\n";
const INTERLEAVED: &str = "family = interleaved\nparts = 2\n\
    part.0.family = power-decay\npart.0.coeffs = 1, 0\npart.0.exponents = 1\n\
    part.1.family = power-decay\npart.1.coeffs = 0, 1\npart.1.exponents = 1\n\
    levy_directions = 1, 0; 0, 1\n";

#[test]
fn greedy_writes_trace_csv() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "h.cfg", HARMONIC);
    let csv = dir.path().join("t.csv");
    let json = dir.path().join("r.json");
    let out = format!("{},{}", json.display(), csv.display());
    assert_eq!(code(&["greedy", "--spec", &spec, "--target", "3.14159", "--depth", "1000000", "--out", &out]), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,S_1,dist_to_target"));
    assert_eq!(lines.next(), Some("1,1,2.14159"));
    assert_eq!(text.lines().count(), 1_000_001);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["schema_version"], "1");
    assert!(report["final_error"].as_f64().unwrap() < 1e-3);
}

#[test]
fn missing_spec_is_input_error() {
    assert_eq!(code(&["greedy", "--spec", "/nonexistent/h.cfg", "--target", "0", "--depth", "5"]), 1);
}

#[test]
fn malformed_spec_reports_line() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "bad.cfg", "family = power-decay\ncoeffs = 1\nexponents\n");
    let out = signum(&["greedy", "--spec", &spec, "--target", "0", "--depth", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn unknown_flag_is_input_error() {
    assert_eq!(code(&["greedy", "--bogus"]), 1);
}

#[test]
fn block_width_one_is_precondition() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "h.cfg", HARMONIC);
    assert_eq!(code(&["lambda-count", "--spec", &spec, "--target", "0", "--k", "1", "--levels", "2"]), 2);
}

#[test]
fn summable_greedy_is_precondition() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "g.cfg", "family = geometric\nratio = 1/2\n");
    assert_eq!(code(&["greedy", "--spec", &spec, "--target", "0", "--depth", "5"]), 2);
}

#[test]
fn budget_is_exhaustion() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "h.cfg", HARMONIC);
    assert_eq!(code(&["lambda-count", "--spec", &spec, "--target", "0", "--k", "5", "--levels", "5"]), 3);
}

#[test]
fn short_horizon_writes_partial_plan() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "i.cfg", INTERLEAVED);
    let json = dir.path().join("plan.json");
    let out = json.to_string_lossy().into_owned();
    let args = ["hit", "--spec", &spec, "--target", "1,-2", "--stages", "8", "--horizon", "100", "--out", &out];
    assert_eq!(code(&args), 3);
    let plan: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(plan["plan"]["exhausted"].is_string());
}

#[test]
fn density_failure_is_exhaustion() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "h.cfg", HARMONIC);
    assert_eq!(code(&["achieve", "--spec", &spec, "--targets=0,100", "--horizon", "10000"]), 3);
    assert_eq!(code(&["achieve", "--spec", &spec, "--targets=0,-1", "--horizon", "10000"]), 0);
}

#[test]
fn measure_round_trips_through_certify() {
    let dir = TempDir::new().unwrap();
    let m = dir.path().join("m.json").to_string_lossy().into_owned();
    let c1 = dir.path().join("c1.json").to_string_lossy().into_owned();
    let c2 = dir.path().join("c2.json").to_string_lossy().into_owned();
    let common = ["--s", "1", "--c", "2", "--depth", "6"];
    let mut a = vec!["certify", "--build", "uniform", "--save-measure", &m, "--out", &c1];
    a.extend(common);
    assert_eq!(code(&a), 0);
    let mut b = vec!["certify", "--measure", &m, "--out", &c2];
    b.extend(common);
    assert_eq!(code(&b), 0);
    assert_eq!(std::fs::read(&c1).unwrap(), std::fs::read(&c2).unwrap());
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let dir = TempDir::new().unwrap();
    let spec = spec_file(&dir, "h.cfg", HARMONIC);
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let out = Command::new(env!("CARGO_BIN_EXE_signum"))
            .env("SIGNUM_THREADS", threads)
            .args(["lambda-count", "--spec", &spec, "--target", "1/10", "--k", "4", "--levels", "4"])
            .output()
            .unwrap();
        assert!(out.status.success());
        outputs.push(out.stdout);
    }
    assert_eq!(outputs[0], outputs[1]);
}
