use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const EXAMPLE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/two_vehicle.toml");

fn risup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_risup"))
        .args(args)
        .env("RISUP_WORKERS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn validate_accepts_the_example() {
    let out = risup(&["validate", "--config", EXAMPLE]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn validate_names_the_bad_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(EXAMPLE).unwrap().replace("d_max = 1", "d_max = 0.3");
    let cfg = write_config(dir.path(), "bad.toml", &text);
    let out = risup(&["validate", "--config", &cfg]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("intersection.d_max"), "{}", stderr(&out));
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(EXAMPLE).unwrap().replace("gamma = 0", "gamma = 0\nspeed_limit = 3");
    let cfg = write_config(dir.path(), "typo.toml", &text);
    assert_eq!(code(&risup(&["validate", "--config", &cfg])), 1);
}

#[test]
fn run_without_table_points_to_synthesize() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let missing = dir.path().join("resilient.table");
    let out = risup(&["run", "--config", EXAMPLE, "--out", out_dir, "--table", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("synthesize"), "{}", stderr(&out));
}

#[test]
fn synthesize_then_run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = risup(&["synthesize", "--config", EXAMPLE, "--out", out_dir]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let table = dir.path().join("resilient.table");
    assert!(table.exists());
    let table = table.to_str().unwrap();

    let run = |seed: &str| {
        let out = risup(&["run", "--config", EXAMPLE, "--out", out_dir, "--table", table, "--seed", seed]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read_to_string(dir.path().join("trace.csv")).unwrap()
    };
    let first = run("11");
    assert_eq!(first, run("11"));
    let last = first.lines().last().unwrap();
    assert!(last.ends_with("SAFE_MARKED") || last.ends_with("DETECTED"), "{last}");
}

#[test]
fn export_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = risup(&["export", "--config", EXAMPLE, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        fs::read(out_dir.join("observer.txt")).unwrap()
    };
    let a = read("a");
    assert_eq!(a, read("b"));
    assert_eq!(a, include_bytes!("golden/two_vehicle_observer.txt"));
}

#[test]
fn unsolvable_config_fails_synthesis() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(EXAMPLE)
        .unwrap()
        .replace("speeds = [1, 3]", "speeds = [1]")
        .replace("d_max = 1", "d_max = 0");
    let text = text.split("[scenario]").next().unwrap().to_owned();
    let cfg = write_config(dir.path(), "stuck.toml", &text);
    let out = risup(&["synthesize", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = risup(&["sweep", "--config", EXAMPLE, "--out", out_dir, "--tmax", "1", "--tmax", "2", "--runs", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
}

#[test]
fn verify_single_criterion() {
    let out = risup(&["verify", "--criterion", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS criterion 3"));
}
