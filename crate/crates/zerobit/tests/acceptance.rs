//! End-to-end acceptance run: every criterion through the CLI with `--check`,
//! one PASS/FAIL line per criterion, runtimes against their budgets.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use serde_json::Value;

struct Criterion {
    id: u32,
    title: &'static str,
    subcommand: &'static str,
    config: &'static str,
    limit_s: f64,
}

const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, title: "polynomial table", subcommand: "table1", config: "table1.json", limit_s: 1.0 },
    Criterion { id: 2, title: "H1 variance", subcommand: "table1", config: "variance.json", limit_s: 30.0 },
    Criterion { id: 3, title: "fundamental-equation residual", subcommand: "pde-check", config: "residual.json", limit_s: 10.0 },
    Criterion { id: 4, title: "orthonormality", subcommand: "ortho", config: "ortho.json", limit_s: 5.0 },
    Criterion { id: 5, title: "lattice efficiencies", subcommand: "lattice-eff", config: "lattice.json", limit_s: 60.0 },
    Criterion { id: 6, title: "scalar Costa scheme", subcommand: "scs-curve", config: "scs.json", limit_s: 10.0 },
    Criterion { id: 7, title: "attack decay laws", subcommand: "efficacy", config: "decay.json", limit_s: 300.0 },
    Criterion { id: 8, title: "fixed-WNR invariance", subcommand: "efficacy", config: "fixed_wnr.json", limit_s: 60.0 },
    Criterion { id: 9, title: "LMP round trip", subcommand: "pde-check", config: "lmp.json", limit_s: 10.0 },
    Criterion { id: 10, title: "asymmetric embedding", subcommand: "asymmetric", config: "asymmetric.json", limit_s: 120.0 },
    Criterion { id: 11, title: "mixture concavity", subcommand: "efficacy", config: "mixture.json", limit_s: 10.0 },
    Criterion { id: 12, title: "ROC dominance", subcommand: "roc", config: "roc.json", limit_s: 300.0 },
];

struct Outcome {
    checks_ok: bool,
    runtime_ok: bool,
    detail: String,
}

fn run_criterion(c: &Criterion, dir: &std::path::Path) -> Outcome {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(c.config);
    let out = dir.join(format!("criterion{}.json", c.id));
    let started = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_zerobit"))
        .arg(c.subcommand)
        .arg("--config")
        .arg(&config)
        .args(["--format", "json", "--check", "--out"])
        .arg(&out)
        .output()
        .expect("binary runs");
    let elapsed = started.elapsed().as_secs_f64();
    let runtime_ok = elapsed < c.limit_s;
    let timing = format!("{elapsed:.2} s of {} s", c.limit_s);
    if !matches!(o.status.code(), Some(0) | Some(2)) {
        return Outcome {
            checks_ok: false,
            runtime_ok,
            detail: format!("{timing}; error: {}", String::from_utf8_lossy(&o.stderr).trim()),
        };
    }
    let doc: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let mine: Vec<&Value> = doc["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|k| k["criterion"] == c.id)
        .collect();
    let failed: Vec<String> = mine
        .iter()
        .filter(|k| k["passed"] != true)
        .map(|k| format!("{} = {} (limit {})", k["name"], k["value"], k["limit"]))
        .collect();
    let summary = &doc["summary"];
    Outcome {
        checks_ok: !mine.is_empty() && failed.is_empty() && o.status.code() == Some(0),
        runtime_ok,
        detail: format!(
            "{timing}; {} checks; {} = {} ± {}{}",
            mine.len(),
            summary["name"].as_str().unwrap_or(""),
            summary["value"],
            summary["std_err"],
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join("; ")) }
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let mut all = true;
    let total = Instant::now();
    for c in &CRITERIA {
        let r = run_criterion(c, dir.path());
        let pass = r.checks_ok && r.runtime_ok;
        all &= pass;
        let verdict = if pass { "PASS" } else { "FAIL" };
        let slow = if r.runtime_ok { "" } else { " [over runtime budget]" };
        println!("criterion {:>2} {verdict}: {}{slow} ({})", c.id, c.title, r.detail);
    }
    println!("total runtime {:.1} s", total.elapsed().as_secs_f64());
    assert!(all, "some acceptance criteria failed; see the lines above");
}
