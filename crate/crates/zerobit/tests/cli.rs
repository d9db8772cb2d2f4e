use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zerobit"))
}

fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn load_schema(name: &str) -> jsonschema::Validator {
    let text = std::fs::read_to_string(crate_dir().join("schema").join(name)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).expect("schema compiles")
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value, what: &str) {
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{what}: {errors:#?}");
}

/// Small-budget invocations covering every subcommand.
const QUICK: &[&[&str]] = &[
    &["table1", "--k", "1..7", "--budget", "2000", "--n", "200"],
    &["hermite-plot", "--k", "1..7", "--range", "-3:3", "--points", "13"],
    &["scs-curve", "--eta", "1", "--sigma", "0:1", "--jmax", "3,5,10", "--points", "11"],
    &["lattice-eff", "--budget", "20000"],
    &["pde-check", "--count", "50"],
    &["pde-check", "--suite", "lmp", "--nodes", "32"],
    &["ortho", "--nodes", "32"],
    &["efficacy", "--suite", "fixed-wnr", "--n", "100", "--budget", "4000"],
    &["efficacy", "--suite", "mixture", "--trials", "10"],
    &["roc", "--n", "240", "--budget", "20000", "--alpha-grid", "0.01,0.1"],
    &["asymmetric", "--n", "100", "--budget", "2000"],
    &["regularity", "--n-list", "50,100", "--budget", "2000"],
];

fn run_to_file(args: &[&str], seed: &str, format: &str, dir: &Path, tag: &str) -> Vec<u8> {
    let out = dir.join(format!("{tag}.{format}"));
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap();
    full.extend(["--seed", seed, "--format", format, "--out", out_s]);
    let o = run(&full);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    std::fs::read(&out).unwrap()
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for (i, args) in QUICK.iter().enumerate() {
        for format in ["csv", "json"] {
            let a = run_to_file(args, "42", format, dir.path(), &format!("a{i}"));
            let b = run_to_file(args, "42", format, dir.path(), &format!("b{i}"));
            assert_eq!(a, b, "{args:?} {format}");
        }
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["efficacy", "--suite", "fixed-wnr", "--n", "100", "--budget", "4000"];
    let one = run_to_file(&[&args[..], &["--workers", "1"]].concat(), "5", "json", dir.path(), "w1");
    let three = run_to_file(&[&args[..], &["--workers", "3"]].concat(), "5", "json", dir.path(), "w3");
    assert_eq!(one, three);
}

#[test]
fn different_seeds_change_monte_carlo_output() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["asymmetric", "--n", "100", "--budget", "2000"];
    let a = run_to_file(&args, "1", "csv", dir.path(), "s1");
    let b = run_to_file(&args, "2", "csv", dir.path(), "s2");
    assert_ne!(a, b);
}

#[test]
fn every_report_validates_against_schema() {
    let schema = load_schema("report.schema.json");
    let dir = tempfile::tempdir().unwrap();
    for (i, args) in QUICK.iter().enumerate() {
        let bytes = run_to_file(args, "9", "json", dir.path(), &format!("r{i}"));
        let doc: Value = serde_json::from_slice(&bytes).unwrap();
        assert_valid(&schema, &doc, &format!("{args:?}"));
        let cols = doc["table"]["columns"].as_array().unwrap().len();
        for row in doc["table"]["rows"].as_array().unwrap() {
            assert_eq!(row.as_array().unwrap().len(), cols, "{args:?}");
        }
    }
}

#[test]
fn shipped_configs_validate_and_parse() {
    let schema = load_schema("config.schema.json");
    let mut seen = 0;
    for entry in std::fs::read_dir(crate_dir().join("configs")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let doc: Value = serde_json::from_str(&text).unwrap();
        assert_valid(&schema, &doc, &path.display().to_string());
        zerobit::config::ExperimentConfig::from_json(&text).unwrap();
        seen += 1;
    }
    assert!(seen >= 12);
}

#[test]
fn csv_has_header_and_rfc4180_line_endings() {
    let o = run(&["hermite-plot", "--k", "1,2", "--range", "-1:1", "--points", "3", "--seed", "1"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let lines: Vec<&str> = text.split("\r\n").collect();
    assert_eq!(lines[0], "r,t_k1,t_k2");
    assert_eq!(lines.len(), 5, "{text:?}");
    assert_eq!(lines[1], "-1,-1,0");
    // The summary goes to stderr when the artifact goes to stdout.
    assert!(stderr(&o).contains("hermite-plot"));
}

#[test]
fn summary_goes_to_stdout_with_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["scs-curve", "--points", "5", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let line = String::from_utf8(o.stdout).unwrap();
    assert!(line.starts_with("scs-curve [default]: eta_scs_nominal = "), "{line}");
    assert!(line.contains('±'));
}

#[test]
fn missing_seed_is_rejected() {
    let o = run(&["ortho"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`seed`"), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"seed": 1, "bugdet": 5}"#, "bugdet", "efficacy"),
        (r#"{"seed": 1, "budget": "many"}"#, "budget", "efficacy"),
        (r#"{"seed": 1, "n": 0, "suite": "fixed-wnr"}"#, "`n`", "efficacy"),
        (r#"{"seed": 1, "suite": "nope"}"#, "`suite`", "efficacy"),
        (r#"{"seed": 1, "scheme": {"family": "polynomial", "params": {}}}"#, "scheme.params.k", "efficacy"),
        (
            r#"{"seed": 1, "scheme": {"family": "polynomial", "params": {"k": 2}}, "channel": {"kind": "additive"}}"#,
            "channel.sigma_z",
            "efficacy",
        ),
        (r#"{"seed": 1, "experiment": "roc"}"#, "`experiment`", "ortho"),
        (r#"{"seed": 1, "lattice": {"kind": "general", "p": 2}}"#, "lattice.G", "lattice-eff"),
    ];
    for (i, (text, needle, cmd)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("c{i}.json"));
        std::fs::write(&path, text).unwrap();
        let mut args = vec![*cmd, "--config", path.to_str().unwrap()];
        if *cmd == "efficacy" {
            args.extend(["--budget", "100"]);
        }
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(stderr(&o).contains(needle), "{text}: {}", stderr(&o));
    }
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, r#"{"seed": 1, "points": 3, "k": [1]}"#).unwrap();
    let o = run(&["hermite-plot", "--config", path.to_str().unwrap(), "--points", "5"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.trim_end().split("\r\n").count(), 6);
}

#[test]
fn budget_violation_is_reported() {
    let o = run(&["roc", "--n", "100", "--budget", "1000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("budget"), "{}", stderr(&o));
}

#[test]
fn check_flag_sets_exit_status_on_violation() {
    // Far too few moment samples for the 0.5% lattice tolerance.
    let args = ["lattice-eff", "--budget", "10000", "--beta", "2", "--seed", "3", "--format", "json"];
    let plain = run(&args);
    assert!(plain.status.success());
    let doc: Value = serde_json::from_slice(&plain.stdout).unwrap();
    let failed = doc["checks"].as_array().unwrap().iter().any(|c| c["passed"] == false);
    let checked = run(&[&args[..], &["--check"]].concat());
    assert_eq!(checked.status.code(), Some(if failed { 2 } else { 0 }));
    assert!(failed, "expected the small budget to miss the tolerance");
}

#[test]
fn custom_scheme_from_config() {
    let path = crate_dir().join("configs/custom_efficacy.json");
    let o = run(&["efficacy", "--config", path.to_str().unwrap(), "--format", "json", "--budget", "5000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["suite"], "custom");
    let closed = doc["table"]["rows"][0][8].as_f64().unwrap();
    // Polynomial k = 3 under Wiener SAWGN: 3 γ⁶ with γ² = 1 / 1.09.
    assert!((closed - 3.0 / 1.09f64.powi(3)).abs() < 1e-12);
}
