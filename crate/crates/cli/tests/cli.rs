//! End-to-end runs of the `obstacle-well` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use obstacle_well::manifest::Manifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_obstacle-well"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().expect("binary runs")
}

fn manifest(out: &Path) -> Manifest {
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn solve_writes_report_fields_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve"], &shipped("well_2d.toml"), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("solve.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["result"]["level"].as_f64().unwrap() > 0.0);
    let m = manifest(dir.path());
    assert_eq!(m.exit_code, 0);
    let names: Vec<&str> = m.artifacts.iter().map(|a| a.path.as_str()).collect();
    for expected in ["solve.json", "solution.csv", "solution.raw", "solution.raw.json"] {
        assert!(names.contains(&expected), "{names:?}");
    }

    let heat = tempfile::tempdir().unwrap();
    let input = dir.path().join("solution.raw");
    let o = bin()
        .args(["heatmap", "--input"])
        .arg(&input)
        .arg("--config")
        .arg(shipped("well_2d.toml"))
        .arg("--out")
        .arg(heat.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let pgm = std::fs::read(heat.path().join("solution.pgm")).unwrap();
    let (w, h, _) = obstacle_well::heatmap::parse_pgm(&pgm).unwrap();
    assert_eq!((w, h), (65, 65));
}

#[test]
fn repeated_runs_have_identical_manifests() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["axioms", "--seed", "3"], &shipped("well_2d.toml"), d.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let (ma, mb) = (manifest(a.path()), manifest(b.path()));
    assert_eq!(ma.seed, 3);
    assert_eq!(ma.artifacts_sha256, mb.artifacts_sha256);
    assert_eq!(ma.config_sha256, mb.config_sha256);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(shipped("well_2d.toml")).unwrap();

    let zero_steps = dir.path().join("zero.toml");
    std::fs::write(&zero_steps, text.replace("lambda_steps = 8", "lambda_steps = 0")).unwrap();
    let o = run(&["sweep-lambda"], &zero_steps, &dir.path().join("a"));
    assert_eq!(o.status.code(), Some(1));

    let broken = dir.path().join("broken.toml");
    std::fs::write(&broken, text.replace("nodes_per_axis = 65", "nodes_per_axis = = 65")).unwrap();
    let o = run(&["solve"], &broken, &dir.path().join("b"));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line"), "{}", String::from_utf8_lossy(&o.stderr));

    let o = run(&["estimate-sobolev"], &shipped("well_2d.toml"), &dir.path().join("c"));
    assert_eq!(o.status.code(), Some(1));

    let o = bin().arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
