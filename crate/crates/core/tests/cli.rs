use std::fs;
use std::path::Path;
use std::process::Command as Process;

use delaystab::cli::{exit_code, parse_config, run, Command, RunConfig, SweepSettings};
use delaystab::criteria::{CriteriaOptions, Verdict};
use delaystab::diagnostics::Predicate;
use delaystab::models::Model;
use delaystab::timefn::Delay;
use serde_json::Value;

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_delaystab"))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Re-validates a certificate from its JSON form alone.
fn independently_sound(cert: &Value) -> bool {
    let checks = cert["checks"].as_array().unwrap();
    let margins_agree = checks.iter().all(|c| {
        let (lhs, rhs) = (c["lhs"].as_f64().unwrap(), c["rhs"].as_f64().unwrap());
        let m = match c["relation"].as_str().unwrap() {
            "<" | "<=" => rhs - lhs,
            _ => lhs - rhs,
        };
        m == c["margin"].as_f64().unwrap()
    });
    let verdict_ok = match cert["verdict"].as_str().unwrap() {
        "UniformExponential" | "Asymptotic" => checks.iter().all(|c| {
            c["satisfied"].as_bool().unwrap()
                && (c["margin"].as_f64().unwrap() > 1e-9 || !c["strict"].as_bool().unwrap())
        }),
        "Inconclusive" => checks.iter().any(|c| !c["satisfied"].as_bool().unwrap()),
        _ => true,
    };
    margins_agree && verdict_ok
}

#[test]
fn check_writes_sound_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["check", "--target", "eq26", "--out"]).arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("certificates.json"));
    let certs = doc["certificates"].as_array().unwrap();
    assert!(certs.iter().all(independently_sound));
    let verdict = |crit: &str| {
        certs.iter().find(|c| c["criterion"] == crit).map(|c| c["verdict"].as_str().unwrap().to_string()).unwrap()
    };
    assert_eq!(verdict("difference_scalar_undelayed_negative"), "UniformExponential");
    assert_eq!(verdict("ratio_scalar_undelayed_negative"), "Inconclusive");
    let leftovers: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 1, "{leftovers:?}");
}

#[test]
fn simulate_writes_trajectory_and_behavior() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["simulate", "--target", "ex51", "--set", "r=4", "--set", "sigma=1.1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(json(&dir.path().join("behavior.json"))["report"]["classification"], "Decaying");
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x,xdot"));
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], 100.0);
}

#[test]
fn sweep_reports_visited_points() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::new(Command::Sweep, "ex5");
    cfg.output = dir.path().to_path_buf();
    cfg.sweep = Some(SweepSettings {
        parameter: "n".into(),
        lo: 0.01,
        hi: 20.0,
        tol: 1e-3,
        predicate: Predicate::CertificateBest,
        parallel_depth: 2,
    });
    let outcome = run(&cfg).unwrap();
    assert_eq!(outcome.files.len(), 2);
    let th = json(&dir.path().join("threshold.json"));
    assert!((th["value"].as_f64().unwrap() - 7.119).abs() < 1e-3);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("param,verdict,classification"));
    assert_eq!(csv.lines().count() - 1, th["evaluations"].as_u64().unwrap() as usize);
}

#[test]
fn reproductions_are_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let out = bin().args(["reproduce", "--target", "example1", "--out"]).arg(d.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("reproduce_example1.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let table = json(&a.path().join("reproduce_example1.json"));
    let row = table["rows"].as_array().unwrap().iter().find(|r| r["provenance"] == "published" && r["quantity"] == "criterion threshold b*").unwrap();
    assert_eq!(row["status"], "pass");
}

#[test]
fn reproduction_mismatches_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["reproduce", "--target", "fig1a", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("reproduce_fig1a.csv")).unwrap();
    assert!(csv.starts_with("quantity,computed,reference,provenance,status,note\n"));
}

#[test]
fn usage_and_numeric_errors_have_distinct_codes() {
    let out = bin().args(["check", "--target", "eq99"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("eq26") && err.contains("ex51"), "{err}");

    let out = bin().args(["check", "--target", "eq3", "--set", "c=1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // both ends certified: nothing to bracket
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "--target", "eq3", "--param", "b", "--lo", "0", "--hi", "0.1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn run_subcommand_reads_configs_and_scenario_files() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("decay.json");
    fs::write(
        &scenario,
        r#"{"model": {"type": "linear", "equation": {
              "positive_terms": [{"coeff": {"kind": {"type": "constant", "value": 1.0}, "class": {"type": "constant"}},
                                  "delay": {"type": "constant_lag", "lag": 1.0}}]}},
            "x0": 1.0, "phi": 1.0, "horizon": 40.0}"#,
    )
    .unwrap();
    let config = dir.path().join("run.json");
    let cfg = format!(
        r#"{{"version": 1, "command": "simulate", "target": {:?}, "output": {:?}}}"#,
        scenario.to_str().unwrap(),
        dir.path().join("out").to_str().unwrap()
    );
    fs::write(&config, cfg).unwrap();
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.path().join("out/behavior.json"))["report"]["classification"], "Decaying");

    fs::write(&config, r#"{"version": 2, "command": "check", "target": "eq3"}"#).unwrap();
    let out = bin().arg("run").arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn configs_round_trip_and_map_to_models() {
    let cfg = parse_config(r#"{"version": 1, "command": "check", "target": "ex5", "overrides": {"n": 11}}"#).unwrap();
    assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg);
    let sc = delaystab::cli::resolve_target(&cfg.target, &cfg.overrides).unwrap();
    let Model::MackeyGlassProduction(m) = &sc.model else { panic!() };
    assert_eq!((m.beta, m.n), (2.0, 11.0));
    assert_eq!(m.p, Delay::lag(3.0).unwrap());
    assert_eq!(m.q, Delay::lag(6.0).unwrap());
    assert!((m.s.value(0.25) - 0.05).abs() < 1e-15);
    assert_eq!(sc.model.best_certificate(&CriteriaOptions::default()).unwrap().verdict, Verdict::Inconclusive);
    assert_eq!(exit_code(&run(&RunConfig::new(Command::Reproduce, "fig9"))), 2);
}
