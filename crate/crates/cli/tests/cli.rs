use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn recipe(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../recipes").join(name)
}

fn plates(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plates"))
        .args(args)
        .env_remove("PLATES_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn files_with(dir: &Path, prefix: &str, ext: &str) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(prefix) && n.ends_with(ext))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_figure_two_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&plates(&["simulate", "-c", s(&recipe("figure2.json")), "--out", s(d)]));
    }
    let csvs = files_with(&a, "field_t", ".csv");
    assert_eq!(csvs.len(), 4, "{csvs:?}");
    for name in &csvs {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn simulate_writes_full_precision_fields() {
    let tmp = TempDir::new().unwrap();
    let out = ok(&plates(&["simulate", "-c", s(&recipe("figure2.json")), "--out", s(tmp.path()), "--times", "0"]));
    assert!(out.contains("max|eta| = 1.000000e-1"), "{out}");
    let text = fs::read_to_string(tmp.path().join("field_t0.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 2 * 6);
    assert_eq!(header[0], "x");
    assert_eq!(header[1], "eta_1");
    assert_eq!(header[7], "deta_1");
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row[0], -60.0);
    assert_eq!(text.lines().count(), 1 + 1024);
}

#[test]
fn zero_amplitude_gives_zero_fields() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.json",
        r#"{"heights": [0, 1, 2], "flows": [0.3, -0.3],
            "initial": [{"plate": 1, "amplitude": 0.0}],
            "grid": {"half_width": 20, "points": 128}, "times": [0, 2]}"#,
    );
    let dir = tmp.path().join("out");
    ok(&plates(&["simulate", "-c", s(&cfg), "--out", s(&dir)]));
    for name in files_with(&dir, "field_t", ".csv") {
        let text = fs::read_to_string(dir.join(&name)).unwrap();
        for line in text.lines().skip(1) {
            for v in line.split(',').skip(1) {
                assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{name}");
            }
        }
    }
}

#[test]
fn zero_flow_stability_is_stable_with_empty_interval_set() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "still.json", r#"{"heights": [0, 1, 2.5, 3], "flows": [0, 0, 0]}"#);
    let out = ok(&plates(&["stability", "-c", s(&cfg), "--out", s(&tmp.path().join("o")), "--count", "120"]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("stable"));
    assert_eq!(lines.next(), Some("K = {}"));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "stable");
}

#[test]
fn figure_two_stability_is_unstable() {
    let tmp = TempDir::new().unwrap();
    let out = ok(&plates(&["stability", "-c", s(&recipe("figure2.json")), "--out", s(tmp.path()), "--count", "150"]));
    assert!(out.starts_with("unstable\nK = {["), "{out}");
    let spectrum = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().count(), 151);
}

#[test]
fn spectrum_dump_writes_matrices() {
    let tmp = TempDir::new().unwrap();
    ok(&plates(&["spectrum", "-c", s(&recipe("figure3.json")), "--k", "-1,0.5", "--dump", "--out", s(tmp.path())]));
    assert_eq!(files_with(tmp.path(), "matrices_k", ".csv").len(), 2);
    let ev = fs::read_to_string(tmp.path().join("eigenvalues.csv")).unwrap();
    assert_eq!(ev.lines().count(), 3);
}

#[test]
fn pseudospec_figure_four_writes_four_contour_files() {
    let tmp = TempDir::new().unwrap();
    let out = ok(&plates(&["pseudospec", "-c", s(&recipe("figure4.json")), "--out", s(tmp.path())]));
    assert_eq!(files_with(tmp.path(), "contours_k", ".json").len(), 4);
    assert_eq!(files_with(tmp.path(), "field_k", ".csv").len(), 4);
    assert_eq!(out.lines().filter(|l| l.contains("width/eps")).count(), 16);
    let c: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("contours_k1.json")).unwrap()).unwrap();
    assert_eq!(c["contours"].as_array().unwrap().len(), 4);
}

#[test]
fn unresolved_level_is_a_configuration_error() {
    // no node of a 31 x 31 grid falls inside the smallest sublevel set at k = 1
    let tmp = TempDir::new().unwrap();
    let out = plates(&["pseudospec", "-c", s(&recipe("figure4.json")), "--k", "1", "--resolution", "31", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside the field range"));
}

#[test]
fn verify_passes_on_the_pristine_build() {
    let tmp = TempDir::new().unwrap();
    let out = plates(&["verify", "--configs", "5", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn ndim_spectrum_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "nd.json",
        r#"{"heights": [0, 1, 2, 3], "flows": [[0.3, 0], [0, 0], [-0.3, 0]]}"#,
    );
    let out = ok(&plates(&["ndim-spectrum", "-c", s(&cfg), "--directions", "2", "--radii", "30", "--out", s(&tmp.path().join("o"))]));
    assert!(out.starts_with("unstable"), "{out}");
}

#[test]
fn invalid_configurations_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    let bad_order = write_config(tmp.path(), "order.json", r#"{"heights": [0, 2, 1], "flows": [0, 0]}"#);
    let bad_len = write_config(tmp.path(), "len.json", r#"{"heights": [0, 1, 2], "flows": [0]}"#);
    let garbage = write_config(tmp.path(), "garbage.json", "not json");
    let missing = tmp.path().join("missing.json");
    for cfg in [&bad_order, &bad_len, &garbage, &missing] {
        let out = plates(&["stability", "-c", s(cfg), "--out", s(&tmp.path().join("o"))]);
        assert_eq!(out.status.code(), Some(2), "{}", cfg.display());
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("plates: "));
    }
    assert_eq!(plates(&["simulate"]).status.code(), Some(2));
}

#[test]
fn output_directory_follows_the_environment() {
    let tmp = TempDir::new().unwrap();
    let target = tmp.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_plates"))
        .args(["spectrum", "-c", s(&recipe("figure2.json")), "--k", "1"])
        .env("PLATES_OUTPUT_DIR", &target)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    ok(&out);
    assert!(target.join("eigenvalues.csv").exists());
    assert!(!tmp.path().join("plates-out").exists());
}

#[test]
fn default_output_directory_is_per_command() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_plates"))
        .args(["spectrum", "-c", s(&recipe("figure2.json")), "--k", "1"])
        .env_remove("PLATES_OUTPUT_DIR")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    ok(&out);
    assert!(tmp.path().join("plates-out/spectrum/manifest.json").exists());
}
