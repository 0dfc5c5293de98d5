use std::fs;
use std::path::Path;
use std::process::Command;

use resilient_schwarz::experiment::Summary;

fn rsc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rsc")).args(args).output().expect("runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_reports_and_compare_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let psc = write_config(
        dir.path(),
        "psc.cfg",
        "problem = poisson2d\ngrid = 15x15\nranks = 4\nmethod = psc\noutput_dir = psc\n",
    );
    let prsc = write_config(
        dir.path(),
        "prsc.cfg",
        "# redundant run\nproblem = poisson2d\ngrid = 15x15\nranks = 4\nmethod = prsc\noutput_dir = prsc\n",
    );
    for cfg in [&psc, &prsc] {
        let out = rsc(&["run", cfg]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("converged=true"));
    }
    let csv = fs::read_to_string(dir.path().join("prsc/history.csv")).unwrap();
    assert!(csv.starts_with("iter,relres,n_alive\n0,1e0,4\n"));
    let summary = Summary::from_file(dir.path().join("prsc/summary.json")).unwrap();
    assert!(summary.converged);
    assert_eq!(summary.config["method"], "prsc");

    let a = dir.path().join("psc/summary.json");
    let b = dir.path().join("prsc/summary.json");
    let out = rsc(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let cmp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(cmp["iteration_ratio"].as_f64().unwrap() < 1.0);
    assert!(cmp["message_overhead"].as_i64().unwrap() > 0);

    let out = rsc(&["compare", b.to_str().unwrap(), b.to_str().unwrap()]);
    let cmp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cmp["iteration_ratio"].as_f64(), Some(1.0));
    assert_eq!(cmp["identical"].as_bool(), Some(true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let odd = write_config(dir.path(), "odd.cfg", "grid = 15x15\nranks = 3\nmethod = srsc\n");
    assert_eq!(rsc(&["run", &odd]).status.code(), Some(1));
    let unknown = write_config(dir.path(), "bad.cfg", "grid = 15x15\ncolour = red\n");
    assert_eq!(rsc(&["run", &unknown]).status.code(), Some(1));
    assert_eq!(rsc(&["run", "/definitely/not/here.cfg"]).status.code(), Some(1));
    let slow = write_config(
        dir.path(),
        "slow.cfg",
        "grid = 15x15\nranks = 4\nmethod = ssc\nsolver = stationary\nmax_iters = 2\n",
    );
    assert_eq!(rsc(&["run", &slow]).status.code(), Some(2));
}

#[test]
fn verify_runs_the_oracle_suite() {
    let out = rsc(&["verify", "--cases", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 2);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
