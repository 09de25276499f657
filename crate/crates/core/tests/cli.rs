//! Black-box tests of the `lqg` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

fn lqg(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lqg"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("LQG_OUT_DIR")
        .output()
        .expect("spawn lqg")
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = lqg(&["spectrum", "--n", "16", "--gamma", "1", "--seed", "9"], out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["spectrum.csv", "field.lqgf"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn spacing_from_stored_spectrum_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let (stored, fresh, reloaded) = (dir.path().join("s"), dir.path().join("f"), dir.path().join("r"));
    let common = ["--n", "32", "--gamma", "0.5", "--seed", "3"];
    assert!(lqg(&[&["spectrum"][..], &common].concat(), &stored).status.success());
    assert!(lqg(&[&["spacing"][..], &common].concat(), &fresh).status.success());
    let from = stored.to_str().unwrap();
    let o = lqg(&[&["spacing", "--from", from][..], &common].concat(), &reloaded);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["spacing.csv", "spacing_summary.csv"] {
        assert_eq!(data_rows(&fresh.join(f)), data_rows(&reloaded.join(f)), "{f}");
    }
}

#[test]
fn invalid_gamma_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = lqg(&["spectrum", "--gamma", "2.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[field]\ngama = 1.0\n").unwrap();
    let o = lqg(&["spectrum", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn kpz_writes_record_and_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = lqg(&["kpz", "--x", "0.5", "--gamma", "0"], dir.path());
    assert!(o.status.success());
    let delta: f64 = String::from_utf8_lossy(&o.stdout).trim().parse().unwrap();
    assert_eq!(delta, 0.5);
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kpz_record.json")).unwrap()).unwrap();
    assert_eq!(record["command"], "kpz");
    assert_eq!(record["run_id"].as_str().unwrap().len(), 12);
}
