//! Exit codes and artifacts of the binary.

use std::path::Path;
use std::process::{Command, Output};

fn fatiq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fatiq")).args(args).arg("--out-dir").arg(out).output().unwrap()
}

#[test]
fn check_mode_passes_for_the_miner_demo() {
    let dir = tempfile::tempdir().unwrap();
    let out = fatiq(&["miner-demo", "--check"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 4, "{stdout}");

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("miner-demo/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "miner-demo");
    assert_eq!(manifest["config"]["miner"]["repeat"], 100);
    let files: Vec<&str> =
        manifest["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["config.toml", "survival.csv", "damage.csv", "crossings.csv"]);
    let header = std::fs::read_to_string(dir.path().join("miner-demo/crossings.csv")).unwrap();
    assert!(header.starts_with("p,miner_ncf,empirical_crossing,grid_step\n"));
}

#[test]
fn failed_checks_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = fatiq(&["laplace", "--check"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    if stdout.lines().any(|l| l.starts_with("FAIL")) {
        assert_eq!(out.status.code(), Some(4), "{stdout}");
        let manifest = std::fs::read_to_string(dir.path().join("laplace/manifest.json")).unwrap();
        assert!(manifest.contains("\"passed\": false"));
    } else {
        assert_eq!(out.status.code(), Some(0), "{stdout}");
    }
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[specimen]\nm = 1.5\nbeta = 2\n").unwrap();
    let out = fatiq(&["beam", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("beta"), "{err}");

    std::fs::write(&cfg, "[load]\ncvs = [0.2, -1.0]\n").unwrap();
    assert_eq!(fatiq(&["random-load", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
    assert_eq!(fatiq(&["miner-demo", "--replications", "0"], dir.path()).status.code(), Some(2));
    assert!(!dir.path().join("random-load").exists(), "nothing is written before validation passes");
}

#[test]
fn numeric_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    // the survival never reaches 1/2 on this cycle grid
    std::fs::write(&cfg, "[mc]\nreplications = 50\nn_max = 1e4\n").unwrap();
    let out = fatiq(&["equiv-load", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn laplace_exponents_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = fatiq(&["laplace", "--k", "5,8"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.path().join("laplace/laplace_table.csv")).unwrap();
    let ks: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["5.0000000000000000e0", "8.0000000000000000e0"]);
}
