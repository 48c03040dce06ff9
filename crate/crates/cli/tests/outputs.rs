use std::path::Path;
use std::process::{Command, Output, Stdio};

use nfl_cli::output::decode_states;

const SMALL: &str = r#"
[grid]
modes = 8
n_max = 3

[scan]
points = 5

[lipschitz]
modes = [8, 12]
pairs = 3
"#;

fn nfl(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nfl"));
    cmd.args(args).arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).arg("--deterministic");
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("NFL_")) {
        cmd.env_remove(k);
    }
    cmd.envs(env.iter().copied()).stdout(Stdio::null()).output().unwrap()
}

#[test]
fn massshell_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = nfl(dir.path(), &["massshell"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/massshell.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# model: {"));
    assert!(lines[1].starts_with("# config_hash: "));
    let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        *header,
        "P_0,E,gradHF_0,gradFD_0,hessFD_0,deltaP,gap,inI0,inB"
    );
    let rows: Vec<&str> = lines.iter().copied().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), 9);
        let mantissa = cells[1].split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{}", cells[1]);
        assert!(cells[7] == "true" || cells[7] == "false");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "massshell");
    assert!(manifest.get("wall_seconds").is_none());
}

#[test]
fn flow_states_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = nfl(dir.path(), &["flow"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(dir.path().join("out/flow_states.bin")).unwrap();
    let (hash, recs) = decode_states(&bytes).unwrap();
    let diag = std::fs::read_to_string(dir.path().join("out/diagnostics.csv")).unwrap();
    assert!(diag.contains(&format!("# basis_hash: {}", hex::encode(hash))));
    let flow: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/flow.json")).unwrap()).unwrap();
    assert!(flow["primary"].is_object());
    let mus: Vec<f64> = recs.iter().map(|r| r.mu).collect();
    assert_eq!(mus, vec![0.4, 0.2, 0.1, 0.05]);
    for r in &recs {
        // C(8 + 3, 3) states
        assert_eq!(r.psi.len(), 165);
        let n: f64 = r.psi.iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-10);
    }
}

#[test]
fn square_integrability_violation_is_a_load_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = nfl(dir.path(), &["hypotheses"], &[("NFL_MODEL_ALPHA", "-0.2")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("H4"));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = nfl(dir.path(), &["hypotheses"], &[("NFL_GRID_MODSE", "8")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_boson_cutoff_fails_verify_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = nfl(dir.path(), &["verify"], &[("NFL_GRID_N_MAX", "1")]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out/verify.json")).unwrap()).unwrap();
    let failed: Vec<&str> = report["failed"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(failed.contains(&"pull_through_guard"), "{failed:?}");
}
