//! End-to-end runs of the `mis` binary.

use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
objective = "min-rate"
schemes = ["bcd", "single", "qsearch"]
seeds = [0, 1]

[layout]
ms1_rows = 3
ms1_cols = 3
ms2_rows = 2
ms2_cols = 2

[channel]
users = 2

[sweep]
axis = "power-dbm"
values = [24.0, 30.0]
"#;

fn mis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mis")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn sweep_output_is_byte_stable_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    // Same output directory both times: the manifest records it.
    let a = dir.path().join("a");
    let run = |workers: &str| {
        let out = mis(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", workers]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        ["results.csv", "manifest.json"].map(|name| std::fs::read(a.join(name)).unwrap())
    };
    let first = run("1");
    let second = run("3");
    assert_eq!(first, second);
    let csv = std::fs::read_to_string(a.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 3);
    assert!(csv.starts_with("scheme,sweep_axis,sweep_value,seed,objective_bits_hz,"));
}

#[test]
fn overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("o");
    let out = mis(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--seeds",
        "7",
        "--scheme",
        "bcd",
    ]);
    assert!(out.status.success());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "sweep");
    assert_eq!(m["seeds"], serde_json::json!([7]));
    assert_eq!(m["config"]["schemes"], serde_json::json!(["bcd"]));
    let csv = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2);
}

#[test]
fn unwritable_output_fails_before_solving() {
    let dir = tempfile::tempdir().unwrap();
    // Large enough that solving would take noticeably long.
    let cfg = write_config(dir.path(), &SMALL.replace("schemes = [\"bcd\", \"single\", \"qsearch\"]", "schemes = [\"pso\"]"));
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let target = blocker.join("out");
    let clock = std::time::Instant::now();
    let out = mis(&["sweep", "--config", &cfg, "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("blocker"));
    assert!(clock.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn invalid_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "objective = \"min-rate\"\nbogus = 1\n");
    let out = mis(&["validate-config", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "[sweep]\naxis = \"allocation\"\nvalues = [1.0]\n[layout]\nms1_rows = 5\nms1_cols = 5\n");
    assert_eq!(mis(&["validate-config", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn validate_config_prints_a_loadable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = mis(&["validate-config", "--config", &cfg]);
    assert!(out.status.success());
    let resolved = String::from_utf8(out.stdout).unwrap();
    assert!(resolved.contains("[solvers.bcd]"));
    let again = write_config(dir.path(), &resolved);
    let out2 = mis(&["validate-config", "--config", &again]);
    assert_eq!(String::from_utf8(out2.stdout).unwrap(), resolved);
}

#[test]
fn robustness_needs_its_section() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = mis(&["robustness", "--config", &cfg, "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_subcommand_passes() {
    let out = mis(&["oracle", "--kind", "brute-force"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("PASS"), "{text}");
}
