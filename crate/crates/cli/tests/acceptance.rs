//! End-to-end acceptance: runs `nfl verify` twice in deterministic mode,
//! prints one line per criterion and exits nonzero if any criterion fails.
//! Built without the libtest harness so the lines are never captured.

use std::path::Path;
use std::process::{Command, Stdio};

use serde_json::Value;

const CRITERIA: [(u8, &str); 10] = [
    (1, "Fock identities on guard subspaces"),
    (2, "two-level closed form and free fiber"),
    (3, "gradient and second-derivative bound"),
    (4, "pull-through, undressed and dressed"),
    (5, "a priori resolvent bound"),
    (6, "mass shell bounds, convexity, speed, monotonicity"),
    (7, "dressed flow versus undressed flow"),
    (8, "compactness majorant and sector tails"),
    (9, "parabola transforms and convexdiff bound"),
    (10, "Lipschitz constant under grid refinement"),
];

fn run_verify(out: &Path) -> (i32, Vec<u8>) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nfl"));
    cmd.args(["verify", "--deterministic", "--out"]).arg(out);
    // stray NFL_* variables would change the run
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("NFL_")) {
        cmd.env_remove(k);
    }
    let status = cmd.stderr(Stdio::null()).status().expect("spawning nfl");
    let bytes = std::fs::read(out.join("verify.json")).expect("verify.json written");
    (status.code().unwrap_or(-1), bytes)
}

fn main() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (code, first) = run_verify(a.path());
    let report: Value = serde_json::from_slice(&first).unwrap();
    let checks = report["checks"].as_array().unwrap();

    let mut all = true;
    for (id, label) in CRITERIA {
        let gating: Vec<&Value> = checks
            .iter()
            .filter(|c| c["criterion"].as_u64() == Some(id as u64) && c["gating"].as_bool() == Some(true))
            .collect();
        let failed: Vec<&str> = gating
            .iter()
            .filter(|c| c["passed"].as_bool() != Some(true))
            .map(|c| c["name"].as_str().unwrap())
            .collect();
        let ok = !gating.is_empty() && failed.is_empty();
        all &= ok;
        if ok {
            println!("criterion {id:>2} PASS  {label} ({} checks)", gating.len());
        } else {
            println!("criterion {id:>2} FAIL  {label}: {}", failed.join(", "));
        }
    }

    let (code2, second) = run_verify(b.path());
    let same = first == second && code == code2;
    all &= same;
    println!(
        "criterion 11 {}  deterministic verify.json byte-identical ({} bytes)",
        if same { "PASS" } else { "FAIL" },
        first.len()
    );

    if code != 0 || !all {
        eprintln!("acceptance failed: nfl verify exited with {code}");
        std::process::exit(1);
    }
}
