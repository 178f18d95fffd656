use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pfc_harness::{Manifest, Table};

fn pfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfc")).args(args).output().expect("spawn pfc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// K = 2, n = 2, d = 3, columns shifted by `t` times a fixed direction.
fn layer_file(dir: &Path, name: &str, t: f64) -> PathBuf {
    let base = [[1.0, 1.2, -1.0, -0.7], [0.3, -0.2, 0.1, 0.4], [0.5, 0.0, -0.5, 0.2]];
    let step = [[0.0, -0.2, 0.0, -0.3], [-0.3, 0.2, -0.1, -0.4], [0.0, 0.0, 0.0, -0.2]];
    let mut text = String::from("2 2 3\n");
    for r in 0..3 {
        let row: Vec<String> = (0..4).map(|c| format!("{}", base[r][c] + t * step[r][c])).collect();
        text.push_str(&row.join(" "));
        text.push('\n');
    }
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn quoted_list(paths: &[&Path]) -> String {
    let items: Vec<String> = paths.iter().map(|p| format!("{:?}", p.to_str().unwrap())).collect();
    format!("[{}]", items.join(", "))
}

#[test]
fn help_exits_zero() {
    let o = pfc(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("theorem1"));
}

#[test]
fn bad_arguments_exit_one() {
    assert_eq!(code(&pfc(&["no-such-experiment"])), 1);
    assert_eq!(code(&pfc(&["theorem1", "--seed", "minus-one"])), 1);
}

#[test]
fn run_requires_a_config() {
    let o = pfc(&["run"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn empty_config_is_rejected_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, "").unwrap();
    let out = dir.path().join("out");
    let o = pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&out)]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error:"));
    assert!(!out.exists());
}

#[test]
fn unknown_kind_and_unknown_param_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "kind = \"theorem9\"\n").unwrap();
    assert_eq!(code(&pfc(&["run", "--config", path_arg(&cfg)])), 1);

    fs::write(&cfg, "kind = \"theorem1\"\n[params]\npathz = 3\n").unwrap();
    let out = dir.path().join("out");
    assert_eq!(code(&pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&out)])), 1);
    assert!(!out.exists());
}

#[test]
fn subcommand_must_match_config_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "kind = \"theorem1\"\n").unwrap();
    let o = pfc(&["theorem2", "--config", path_arg(&cfg)]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn etf_check_writes_checksummed_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("etf");
    let o = pfc(&["etf-check", "--out", path_arg(&out), "--set", "classes=[2, 3, 4]"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = Manifest::read(&out).unwrap();
    assert!(manifest.artifacts.contains_key("etf.csv"));
    assert!(manifest.threads >= 1);
    let t = Table::read(&out.join("etf.csv")).unwrap();
    assert_eq!(t.column("num_classes").unwrap(), vec![2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
    assert!(t.column("gram_identity_error").unwrap().iter().all(|&e| e < 1e-12));
}

#[test]
fn identical_runs_produce_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("t1.toml");
    fs::write(&cfg, "kind = \"theorem1\"\nseed = 11\n[params]\npaths = 4\ngrid_points = 51\n").unwrap();
    let mut artifacts = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        artifacts.push(Manifest::read(&out).unwrap().artifacts);
    }
    assert_eq!(artifacts[0], artifacts[1]);

    let out = dir.path().join("c");
    let o = pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&out), "--seed", "12"]);
    assert_eq!(code(&o), 0);
    assert_ne!(Manifest::read(&out).unwrap().artifacts, artifacts[0]);
}

#[test]
fn theorem_runs_report_decreasing_paths() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["theorem1", "theorem2"] {
        let out = dir.path().join(kind);
        let o = pfc(&[kind, "--out", path_arg(&out), "--set", "paths=3", "--set", "grid_points=101"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let t = Table::read(&out.join("verdicts.csv")).unwrap();
        assert_eq!(t.rows.len(), 3);
        assert!(t.text_column("verdict").unwrap().iter().all(|v| v == "strictly-decreasing"));
    }
}

#[test]
fn pfc_report_places_equally_spaced_layers() {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        layer_file(dir.path(), "l0.txt", 0.0),
        layer_file(dir.path(), "l1.txt", 1.0),
        layer_file(dir.path(), "l2.txt", 2.0),
    ];
    let cfg = dir.path().join("r.toml");
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    fs::write(&cfg, format!("kind = \"pfc-report\"\n[params]\nstack = {}\n", quoted_list(&refs))).unwrap();
    let out = dir.path().join("out");
    let o = pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let layers = Table::read(&out.join("layers.csv")).unwrap();
    let pos = layers.column("relative_position").unwrap();
    assert_eq!(pos.len(), 3);
    for (p, want) in pos.iter().zip([0.0, 0.5, 1.0]) {
        assert!((p - want).abs() < 1e-12, "{pos:?}");
    }
    // Layers lie on the line, so the straight-line prediction is exact.
    let (got, predicted) = (layers.column("pfc1").unwrap(), layers.column("geodesic_pfc1").unwrap());
    for (a, b) in got.iter().zip(&predicted) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
    let geodesic = Table::read(&out.join("geodesic.csv")).unwrap();
    assert_eq!(geodesic.header, vec!["t", "pfc1", "pfc2", "pfc3"]);
}

#[test]
fn pfc_report_of_a_motionless_stack_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let a = layer_file(dir.path(), "a.txt", 0.0);
    let b = layer_file(dir.path(), "b.txt", 0.0);
    let cfg = dir.path().join("r.toml");
    fs::write(&cfg, format!("kind = \"pfc-report\"\n[params]\nstack = {}\n", quoted_list(&[&a, &b]))).unwrap();
    let o = pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&dir.path().join("out"))]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn pfc_report_rejects_mismatched_layers() {
    let dir = tempfile::tempdir().unwrap();
    let a = layer_file(dir.path(), "a.txt", 0.0);
    let b = dir.path().join("b.txt");
    fs::write(&b, "2 1 3\n1 -1\n0 0\n2 1\n").unwrap();
    let cfg = dir.path().join("r.toml");
    fs::write(&cfg, format!("kind = \"pfc-report\"\n[params]\nstack = {}\n", quoted_list(&[&a, &b]))).unwrap();
    let o = pfc(&["run", "--config", path_arg(&cfg), "--out", path_arg(&dir.path().join("out"))]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn interpolate_writes_three_curves() {
    let dir = tempfile::tempdir().unwrap();
    let a = layer_file(dir.path(), "a.txt", 0.0);
    let b = layer_file(dir.path(), "b.txt", 1.0);
    let out = dir.path().join("out");
    let o = pfc(&[
        "interpolate",
        "--out",
        path_arg(&out),
        "--set",
        &format!("start={:?}", a.to_str().unwrap()),
        "--set",
        &format!("end={:?}", b.to_str().unwrap()),
        "--set",
        "grid_points=21",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = Table::read(&out.join("curve.csv")).unwrap();
    assert_eq!(t.rows.len(), 63);
    let kinds = t.text_column("metric_kind").unwrap();
    assert_eq!(kinds.iter().filter(|k| *k == "PFC2").count(), 21);
}

#[test]
fn solve_mufm_features_reload() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = pfc(&[
        "solve-mufm",
        "--out",
        path_arg(&out),
        "--set",
        "epochs=200",
        "--set",
        "per_class=10",
        "--set",
        "trace_stride=50",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let h = pfc_core::io::read_feature_set(&out.join("features.txt")).unwrap();
    assert_eq!((h.num_classes(), h.per_class(), h.dim()), (5, 10, 20));
    let trace = Table::read(&out.join("trace.csv")).unwrap();
    let epochs = trace.column("epoch").unwrap();
    assert_eq!(epochs.first(), Some(&0.0));
    assert_eq!(epochs.last(), Some(&200.0));
    let obj = trace.column("objective").unwrap();
    assert!(obj.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn small_resnet_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = pfc(&[
        "train-resnet",
        "--out",
        path_arg(&out),
        "--set",
        "epochs=3",
        "--set",
        "decay_epochs=[2]",
        "--set",
        "num_blocks=2",
        "--set",
        "per_class=8",
        "--set",
        "grid_points=11",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let manifest = Manifest::read(&out).unwrap();
    for name in ["trace.csv", "layers.csv", "geodesic.csv", "summary.json", "snapshot/layer_00.txt"] {
        assert!(manifest.artifacts.contains_key(name), "missing {name}");
    }
    let layers = Table::read(&out.join("layers.csv")).unwrap();
    assert_eq!(layers.rows.len(), 3);
}
