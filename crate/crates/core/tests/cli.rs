use std::path::Path;
use std::process::{Command, Output};

use nhtai::ensemble::PointRecord;
use nhtai::output::{read_json, CSV_HEADER};

fn nhtai(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_nhtai"))
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

const SMALL: &str = r#"{
    "model": {"t_prime": 0.7, "gamma": 0.6, "L": 40, "W": 1.0},
    "ensemble": {"realizations": 4},
    "winding": {"l": 8},
    "grid": {"axis1": {"param": "gamma", "values": [0.0, 0.6]},
             "axis2": {"param": "W", "values": [0.0, 1.2]}},
    "output": {"format": "both"}
}"#;

#[test]
fn validate_passes() {
    let out = Command::new(env!("CARGO_BIN_EXE_nhtai")).arg("validate").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(!stdout.contains("[FAIL]"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in [r#"{"model": {"gama": 1}}"#, r#"{"winding": {"l": 21}}"#, "{", r#"{"ensemble": {"realizations": 0}}"#] {
        let out = nhtai(dir.path(), bad, &["point"]);
        assert_eq!(out.status.code(), Some(2), "{bad}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = Command::new(env!("CARGO_BIN_EXE_nhtai"))
        .args(["--config", "/nonexistent/config.json", "point"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn trivial_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"model": {"t_prime": 0.7, "L": 40}, "ensemble": {"realizations": 3}, "winding": {"l": 8}}"#;
    let out = nhtai(dir.path(), cfg, &["point"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/run_point.json")).unwrap();
    let record: PointRecord = serde_json::from_str(&text).unwrap();
    assert!(record.nu_mean.abs() < 0.1 && record.nu_stderr == 0.0 && !record.failed);
}

#[test]
fn sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = nhtai(dir.path(), SMALL, &["sweep"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 4);
    let result = read_json(std::fs::File::open(dir.path().join("out/run.json")).unwrap()).unwrap();
    assert_eq!(result.points.len(), 4);
    assert_eq!(result.points[3].axis1, 0.6);
    assert_eq!(result.points[3].axis2, 1.2);
    assert!(dir.path().join("out/run.checkpoint.jsonl").exists());

    let again = nhtai(dir.path(), SMALL, &["--resume", "sweep"]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("out/run.csv")).unwrap(), csv);
}

#[test]
fn seed_and_threads_flags() {
    let dir = tempfile::tempdir().unwrap();
    let read = |d: &Path| std::fs::read_to_string(d.join("out/run.csv")).unwrap();
    assert!(nhtai(dir.path(), SMALL, &["--threads", "2", "sweep"]).status.success());
    let base = read(dir.path());
    assert!(nhtai(dir.path(), SMALL, &["--threads", "1", "sweep"]).status.success());
    assert_eq!(read(dir.path()), base);
    assert!(nhtai(dir.path(), SMALL, &["--seed", "99", "sweep"]).status.success());
    assert_ne!(read(dir.path()), base);
}

#[test]
fn auxiliary_commands() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file, header) in [
        ("spectrum", "run_spectrum.csv", "W,"),
        ("states", "run_states.csv", "site,cell,density_obc,density_pbc,density_obc_avg"),
        ("loclen", "run_loclen.csv", "gamma,W,inv_loc_length"),
    ] {
        let out = nhtai(dir.path(), SMALL, &[cmd]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = std::fs::read_to_string(dir.path().join("out").join(file)).unwrap();
        assert!(text.starts_with(header), "{cmd}: {}", text.lines().next().unwrap_or(""));
    }
    let roots = std::fs::read_to_string(dir.path().join("out/run_roots.csv")).unwrap();
    assert!(roots.starts_with("gamma,W_star"));
    let out = nhtai(dir.path(), SMALL, &["states", "--state", "41"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if let Err(e) = nhtai::config::parse_config(&text) {
            panic!("{}: {e}", path.display());
        }
        n += 1;
    }
    assert!(n > 0);
}
