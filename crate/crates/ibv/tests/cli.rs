use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ibv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibv")).args(args).output().expect("spawn ibv")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const PLAY: &str = "model.kind = \"play\"\nscheme.tau = 1e-3\nscheme.eps = 1e-2\n";

#[test]
fn run_audit_plot_on_play() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PLAY);
    let out = dir.path().join("out");
    let o = ibv(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("class: classic"), "{stdout}");

    let o = ibv(&["audit", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));

    let o = ibv(&["plot", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(out.join("u.svg").is_file() && out.join("ledger.svg").is_file());
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.kind = \"play\"\n\nscheme.tua = 1e-3\n");
    let o = ibv(&["run", &cfg]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("tua"), "{err}");
}

#[test]
fn unstable_play_start_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model.kind = \"play\"\nmodel.u0 = 3.0\n");
    let o = ibv(&["run", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sweep_reports_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "model.kind = \"play\"\nsweep.tau = [0.015625, 0.00390625, 0.0009765625]\nsweep.eps = [0.125, 0.0625, 0.03125]\n",
    );
    let out = dir.path().join("out");
    let o = ibv(&["sweep", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("convergence: contracting"), "{stdout}");
    assert!(out.join("convergence.csv").is_file());
}

#[test]
fn audit_of_a_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = ibv(&["audit", dir.path().join("nope").to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn jumpcost_outside_the_horizon_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), PLAY);
    let o = ibv(&["jumpcost", &cfg, "--t", "5.0", "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
