use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use onecircuit::comp_op::{build_from_target_h0, CCFamily, WeightedGraphModel};
use onecircuit::moments::MomentSequence;
use serde_json::Value;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onecircuit")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn build_exotic_reports_not_hyponormal() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["build-exotic", "--eta", "2", "--source", "quartic", "--out", "m.json", "--report", "r.json"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&d.path().join("r.json"));
    assert_eq!(r["hyponormality"]["verdict"], "NotHyponormal");
    assert!(r["diagnostics"]["gs_checks"].is_object());
    let xi = r["xi"]["xi"].as_f64().unwrap();
    let nu1 = r["xi"]["nu_at_one"].as_f64().unwrap();
    assert!((xi + nu1).abs() <= 1e-10 * nu1);
    assert_eq!(r["hankel_evidence"].as_array().unwrap().len(), 3);
    // the written model is readable by the other commands
    assert_eq!(code(&run(&["check-hyponormal", "m.json", "--report", "h.json"], d.path())), 2);
    assert!(json(&d.path().join("h.json"))["min_slack"].as_f64().unwrap() < 0.0);
    let o = run(&["h-table", "m.json", "--max-n", "4", "--csv", "--slack"], d.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let slack = text.lines().last().unwrap();
    assert!(slack.starts_with("slack,-"));
}

#[test]
fn eta_one_is_hyponormal() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["build-exotic", "--eta", "1", "--out", "m.json", "--report", "r.json"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(json(&d.path().join("r.json"))["hyponormality"]["verdict"], "Hyponormal");
    assert_eq!(code(&run(&["check-hyponormal", "m.json"], d.path())), 0);
}

fn write_config(dir: &Path) {
    let cfg = r#"{
        "seeds": [{"atoms": [[1.5, 0.25], [3.0, 0.75]]}, {"atoms": [[2.0, 1.0]]}],
        "weights": [0.7, 1.3],
        "kappa": 1,
        "branch_depth": 10
    }"#;
    fs::write(dir.join("cfg.json"), cfg).unwrap();
}

#[test]
fn verify_cc_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    write_config(d.path());
    let o = run(&["build-subnormal", "cfg.json", "--out", "m.json", "--family", "f.json", "--report", "r.json"], d.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(json(&d.path().join("r.json"))["Theta"].as_f64().unwrap() <= 1.0);
    assert_eq!(code(&run(&["verify-cc", "m.json", "f.json"], d.path())), 0);

    let mut fam: CCFamily = serde_json::from_str(&fs::read_to_string(d.path().join("f.json")).unwrap()).unwrap();
    let p = fam.p.values_mut().next().unwrap();
    *p = p.scale_mass(1.01);
    fs::write(d.path().join("bad.json"), serde_json::to_string(&fam).unwrap()).unwrap();
    let o = run(&["verify-cc", "m.json", "bad.json", "--tol", "1e-10"], d.path());
    assert_eq!(code(&o), 2);
    let diag: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(diag["error"], "verification");
}

#[test]
fn h_table_final_example() {
    let d = tempfile::tempdir().unwrap();
    let gamma: Vec<f64> = (0..=14).map(|n| 0.5 * (0.5f64.powi(n) + 2f64.powi(n))).collect();
    let m = build_from_target_h0(&MomentSequence::exact(gamma.clone()), 0, 1.0).unwrap();
    fs::write(d.path().join("m.json"), serde_json::to_string(&m).unwrap()).unwrap();
    let args = ["h-table", "m.json", "--max-n", "10", "--csv"];
    let a = run(&args, d.path());
    assert_eq!(code(&a), 0);
    let b = run(&args, d.path());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("n,h(x0),err(x0),"));
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], n.to_string());
        let h: f64 = cells[1].parse().unwrap();
        assert!((h - gamma[n]).abs() <= 1e-12 * gamma[n], "n={n}: {h}");
        if n == 0 {
            assert!(cells[1..].iter().step_by(2).all(|c| *c == "1e0"));
        }
    }
}

#[test]
fn json_artifacts_round_trip() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["build-exotic", "--eta", "3", "--out", "m.json", "--report", "r.json"], d.path())), 0);
    let text = fs::read_to_string(d.path().join("m.json")).unwrap();
    let m: WeightedGraphModel = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&m).unwrap() + "\n", text);

    assert_eq!(code(&run(&["quartic", "--atoms", "20", "--which", "rho", "--out", "rho.json"], d.path())), 0);
    let o = run(&["transform", "rho.json", "--theta", "1", "--shift", "0", "--out", "s.json"], d.path());
    assert_eq!(code(&o), 0);
    // a sequence written by transform is accepted as input again
    let o = run(&["transform", "s.json", "--theta", "2", "--shift", "-1", "--out", "t.json"], d.path());
    assert_eq!(code(&o), 0);
    let o = run(&["transform", "t.json", "--theta", "2", "--shift", "-1", "--inverse", "--out", "u.json"], d.path());
    assert_eq!(code(&o), 0);
    let s = json(&d.path().join("s.json"));
    let u = json(&d.path().join("u.json"));
    for (x, y) in s["values"].as_array().unwrap().iter().zip(u["values"].as_array().unwrap()) {
        let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
        assert!((x - y).abs() <= 1e-10 * x);
    }
    let o = run(&["hankel", "rho.json", "--max-n", "8", "--precision", "high", "--report", "h.json"], d.path());
    assert_eq!(code(&o), 0);
    assert_eq!(json(&d.path().join("h.json"))["verdict"], "StieltjesConsistent");
}

#[test]
fn lambda_and_euler() {
    let d = tempfile::tempdir().unwrap();
    let tau = r#"{"atoms": [[2.0, 1.0], [3.0, 0.5], [5.0, 0.25]]}"#;
    fs::write(d.path().join("tau.json"), tau).unwrap();
    fs::write(d.path().join("p.json"), r#"{"eta": 2, "k": 1}"#).unwrap();
    fs::write(d.path().join("q.json"), r#"{"blocks": [[0], [1], [2]]}"#).unwrap();
    let o = run(&["lambda", "--tau", "tau.json", "--partition", "p.json"], d.path());
    assert_eq!(code(&o), 0);
    let canonical: Value = serde_json::from_slice(&o.stdout).unwrap();
    let o = run(&["lambda", "--tau", "tau.json", "--partition", "q.json"], d.path());
    let singles: Value = serde_json::from_slice(&o.stdout).unwrap();
    let s = singles["value"].as_f64().unwrap();
    assert!((s - singles["sup_bound"].as_f64().unwrap()).abs() <= 1e-12 * s);
    assert!(canonical["value"].as_f64().unwrap() < s);

    let o = run(&["euler-threshold", "--a", "2"], d.path());
    assert_eq!(code(&o), 0);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(r["q0"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_one() {
    let d = tempfile::tempdir().unwrap();
    for args in [&["nope"][..], &["hankel"], &["hankel", "missing.json"], &["asc-measure", "--a", "2", "--q", "0.9"]] {
        let o = run(args, d.path());
        assert_eq!(code(&o), 1, "{args:?}");
        let diag: Value = serde_json::from_slice(&o.stderr).unwrap();
        assert_eq!(diag["error"], "usage");
    }
    assert_eq!(code(&run(&["--help"], d.path())), 0);
}
