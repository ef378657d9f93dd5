use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn laakso(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_laakso"))
        .args(args)
        .env("LAAKSO_OUT", dir.join("out"))
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn build_writes_vertex_and_edge_tables() {
    let tmp = TempDir::new().unwrap();
    let o = laakso(tmp.path(), &["build", "--j", "2", "-n", "2"]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    assert!(stdout(&o).contains("14 vertices, 16 edges"));
    let vertices = fs::read_to_string(tmp.path().join("out/vertices.csv")).unwrap();
    let edges = fs::read_to_string(tmp.path().join("out/edges.csv")).unwrap();
    assert!(vertices.starts_with("# laakso "));
    assert_eq!(vertices.lines().filter(|l| !l.starts_with('#')).count(), 1 + 14);
    assert_eq!(edges.lines().filter(|l| !l.starts_with('#')).count(), 1 + 16);
}

#[test]
fn spectrum_is_cached_and_reused() {
    let tmp = TempDir::new().unwrap();
    let first = laakso(tmp.path(), &["spectrum", "--j", "2", "-n", "3"]);
    assert_eq!(first.status.code(), Some(0));
    assert!(!stdout(&first).contains("cached"));
    let second = laakso(tmp.path(), &["spectrum", "--j", "2", "-n", "3", "--seed", "99"]);
    assert!(stdout(&second).contains("(cached)"), "{}", stdout(&second));
    let hk = laakso(tmp.path(), &["heatkernel", "--j", "2", "-n", "3"]);
    assert_eq!(hk.status.code(), Some(0), "{hk:?}");
    assert!(stdout(&hk).contains("cached spectrum"));
    let rows = fs::read_to_string(tmp.path().join("out/heatkernel.csv")).unwrap();
    assert!(rows.lines().nth(1).unwrap() == "t,x,y,p,lower,upper");
}

#[test]
fn empty_check_list_succeeds() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(tmp.path(), "run.toml", "level = 3\n[space]\nj = 2\n[verify]\nchecks = []\n");
    let o = laakso(tmp.path(), &["verify", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(json["checks"].as_array().unwrap().len(), 0);
    assert!(json["config_hash"].is_string());
}

#[test]
fn failing_threshold_exits_one() {
    let tmp = TempDir::new().unwrap();
    let defaults = include_str!("../data/thresholds.toml").replace("max_ratio = 16", "max_ratio = 1");
    let th = write(tmp.path(), "strict.toml", &defaults);
    let cfg = write(
        tmp.path(),
        "run.toml",
        &format!("level = 4\nthresholds = {th:?}\n[space]\nj = 2\n[verify]\nchecks = [\"vd\"]\n"),
    );
    let o = laakso(tmp.path(), &["verify", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");
}

#[test]
fn config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let bad = write(tmp.path(), "bad.toml", "level = 3\n[space]\nj = = 2\n");
    let o = laakso(tmp.path(), &["build", "-c", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let short = write(tmp.path(), "short.toml", "level = 4\n[space]\nlist = [2, 3, 2]\n");
    assert_eq!(laakso(tmp.path(), &["build", "-c", &short]).status.code(), Some(2));

    let unknown = write(tmp.path(), "unknown.toml", "level = 2\ncolour = 1\n[space]\nj = 2\n");
    assert_eq!(laakso(tmp.path(), &["build", "-c", &unknown]).status.code(), Some(2));

    assert_eq!(laakso(tmp.path(), &["build"]).status.code(), Some(2));
}

#[test]
fn walk_and_report_share_the_config_hash() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(
        tmp.path(),
        "run.toml",
        "level = 4\nseed = 2\n[space]\nj = 2\n[walk]\nwalkers = 200\nradii = [0.125, 0.25]\n",
    );
    assert_eq!(laakso(tmp.path(), &["walk", "-c", &cfg]).status.code(), Some(0));
    let o = laakso(tmp.path(), &["report", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let walk: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/walk.json")).unwrap()).unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(walk["config_hash"], report["config_hash"]);
    assert_eq!(report["sections"]["walk"]["seed"], 2);
    let raw = fs::read_to_string(tmp.path().join("out/exit_times.csv")).unwrap();
    assert_eq!(raw.lines().count(), 2 + 2 * 200);
}
