//! Black-box tests driving the compiled binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kdm-helio"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary should launch")
}

fn stderr_line(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).trim_end().to_string()
}

fn stdout_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

/// Two radial bands with distinct speed scales, a sprinkle of fill
/// sentinels, and a couple of empty density cells.
fn write_fixture_csv(path: &Path, rows: usize) {
    let mut text = String::from("radial_distance_au,vp_fit,np_fit\n");
    let mut state = 0x2545f4914f6cdd1du64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..rows {
        let (r, v) = if i % 2 == 0 {
            (0.22 + 0.06 * next(), 380.0 + 90.0 * next())
        } else {
            (0.62 + 0.06 * next(), 520.0 + 90.0 * next())
        };
        let d = 8.0 * (0.4 * (next() - 0.5)).exp();
        if i % 41 == 5 {
            writeln!(text, "{r},-1.0e31,{d}").unwrap();
        } else if i % 53 == 9 {
            writeln!(text, "{r},{v},").unwrap();
        } else {
            writeln!(text, "{r},{v},{d}").unwrap();
        }
    }
    std::fs::write(path, text).unwrap();
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn with_store(rows: usize) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        write_fixture_csv(&root.join("in.csv"), rows);
        let out = run(&[
            "ingest",
            "--input",
            root.join("in.csv").to_str().unwrap(),
            "--store",
            root.join("store").to_str().unwrap(),
            "--chunk-rows",
            "256",
        ]);
        assert!(out.status.success(), "ingest failed: {}", stderr_line(&out));
        Workspace { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_str().unwrap().to_string()
    }
}

#[test]
fn unknown_bin_is_a_usage_error() {
    let ws = Workspace::with_store(400);
    let out = run(&[
        "fit",
        "--store",
        &ws.path("store"),
        "--param",
        "vp_fit",
        "--bin",
        "0.2-0.35",
        "--out",
        &ws.path("out"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let line = stderr_line(&out);
    assert!(
        line.starts_with("error: usage: "),
        "unexpected stderr: {line}"
    );
    assert!(line.contains("0.2-0.35"), "unexpected stderr: {line}");
}

#[test]
fn malformed_config_is_a_schema_error() {
    let ws = Workspace::with_store(200);
    std::fs::write(ws.root.join("cfg.json"), "{\"store\": 5}").unwrap();
    let out = run(&[
        "stats",
        "--config",
        &ws.path("cfg.json"),
        "--out",
        &ws.path("out"),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr_line(&out).starts_with("error: schema: invalid config"),
        "unexpected stderr: {}",
        stderr_line(&out)
    );
}

#[test]
fn missing_model_is_a_data_error() {
    let ws = Workspace::with_store(200);
    let out = run(&[
        "curves",
        "--model",
        &ws.path("out/models/none.json"),
        "--out",
        &ws.path("out"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(
        stderr_line(&out).starts_with("error: data: model not found at "),
        "unexpected stderr: {}",
        stderr_line(&out)
    );
}

#[test]
fn nonpositive_learning_rate_is_a_usage_error() {
    let ws = Workspace::with_store(400);
    let out = run(&[
        "fit",
        "--store",
        &ws.path("store"),
        "--param",
        "vp_fit",
        "--bin",
        "0.2-0.3",
        "--out",
        &ws.path("out"),
        "--lr",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_line(&out).starts_with("error: usage: "));
}

#[test]
fn locked_out_dir_is_a_data_error() {
    let ws = Workspace::with_store(200);
    std::fs::create_dir_all(ws.root.join("out")).unwrap();
    std::fs::write(ws.root.join("out/.lock"), "").unwrap();
    let out = run(&[
        "stats",
        "--store",
        &ws.path("store"),
        "--out",
        &ws.path("out"),
    ]);
    assert_eq!(out.status.code(), Some(4));
    let line = stderr_line(&out);
    assert!(
        line.starts_with("error: data: ") && line.contains("locked"),
        "unexpected stderr: {line}"
    );
}

#[test]
fn stats_reruns_are_byte_identical() {
    let ws = Workspace::with_store(800);
    let args = [
        "stats",
        "--store",
        &ws.path("store"),
        "--params",
        "vp_fit,np_fit",
        "--out",
        &ws.path("out"),
        "--svg",
    ];
    let first = run(&args);
    assert!(first.status.success(), "stats failed: {}", stderr_line(&first));
    let json_a = std::fs::read(ws.root.join("out/stats.json")).unwrap();
    let csv_a = std::fs::read(ws.root.join("out/stats.csv")).unwrap();
    let svg_a = std::fs::read(ws.root.join("out/boxplot_vp_fit.svg")).unwrap();
    let second = run(&args);
    assert!(second.status.success());
    assert_eq!(json_a, std::fs::read(ws.root.join("out/stats.json")).unwrap());
    assert_eq!(csv_a, std::fs::read(ws.root.join("out/stats.csv")).unwrap());
    assert_eq!(svg_a, std::fs::read(ws.root.join("out/boxplot_vp_fit.svg")).unwrap());
    assert!(!ws.root.join("out/.lock").exists(), "lock file left behind");
}

#[test]
fn fit_then_curves_sample_anomaly() {
    let ws = Workspace::with_store(900);
    let fit = run(&[
        "fit",
        "--store",
        &ws.path("store"),
        "--param",
        "vp_fit",
        "--bin",
        "0.2-0.3",
        "--out",
        &ws.path("out"),
        "--components",
        "12",
        "--epochs",
        "15",
    ]);
    assert!(fit.status.success(), "fit failed: {}", stderr_line(&fit));
    let model = ws.path("out/models/vp_fit_0.2-0.3AU.json");
    assert!(Path::new(&model).exists());

    let curves = run(&[
        "curves",
        "--param",
        "vp_fit",
        "--bin",
        "0.2-0.3",
        "--out",
        &ws.path("out"),
        "--points",
        "65",
        "--svg",
    ]);
    assert!(curves.status.success(), "curves failed: {}", stderr_line(&curves));
    let csv = std::fs::read_to_string(ws.root.join("out/curves_vp_fit_0.2-0.3AU.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x,pdf,cdf"));
    assert_eq!(lines.count(), 65);
    assert!(ws.root.join("out/curves_vp_fit_0.2-0.3AU.svg").exists());

    let sample = run(&[
        "sample",
        "--model",
        &model,
        "--count",
        "200",
        "--seed",
        "4",
        "--out",
        &ws.path("out"),
    ]);
    assert!(sample.status.success(), "sample failed: {}", stderr_line(&sample));
    let drawn = std::fs::read_to_string(ws.root.join("out/samples_vp_fit_0.2-0.3AU.csv")).unwrap();
    assert_eq!(drawn.lines().next(), Some("vp_fit"));
    assert_eq!(drawn.lines().count(), 201);

    let anomaly = run(&[
        "anomaly",
        "--model",
        &model,
        "--alpha",
        "0.02",
        "--out",
        &ws.path("out"),
    ]);
    assert!(anomaly.status.success(), "anomaly failed: {}", stderr_line(&anomaly));
    let thresholds = std::fs::read_to_string(ws.root.join("out/anomaly_vp_fit_0.2-0.3AU.json")).unwrap();
    assert!(thresholds.contains("\"lower\""), "thresholds: {thresholds}");
    assert!(thresholds.contains("\"upper\""), "thresholds: {thresholds}");
}

#[test]
fn bivariate_fit_feeds_grid() {
    let ws = Workspace::with_store(900);
    let fit = run(&[
        "fit",
        "--store",
        &ws.path("store"),
        "--param",
        "vp_fit",
        "--param2",
        "np_fit",
        "--bin",
        "0.6-0.7",
        "--out",
        &ws.path("out"),
        "--components",
        "12",
        "--epochs",
        "15",
    ]);
    assert!(fit.status.success(), "fit failed: {}", stderr_line(&fit));
    let model = ws.path("out/models/vp_fit__np_fit_0.6-0.7AU.json");
    let grid = run(&[
        "grid",
        "--model",
        &model,
        "--nx",
        "48",
        "--ny",
        "40",
        "--out",
        &ws.path("out"),
        "--svg",
    ]);
    assert!(grid.status.success(), "grid failed: {}", stderr_line(&grid));
    let csv = std::fs::read_to_string(ws.root.join("out/grid_vp_fit__np_fit_0.6-0.7AU.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,density"));
    assert_eq!(csv.lines().count(), 1 + 48 * 40);
    assert!(ws.root.join("out/grid_vp_fit__np_fit_0.6-0.7AU.svg").exists());

    let sampled = run(&[
        "sample",
        "--model",
        &model,
        "--count",
        "50",
        "--out",
        &ws.path("out"),
    ]);
    assert!(sampled.status.success(), "sample failed: {}", stderr_line(&sampled));
    let drawn = std::fs::read_to_string(ws.root.join("out/samples_vp_fit__np_fit_0.6-0.7AU.csv")).unwrap();
    assert_eq!(drawn.lines().next(), Some("vp_fit,np_fit"));
}

#[test]
fn report_builds_the_full_artifact_set() {
    let ws = Workspace::with_store(700);
    let args = [
        "report",
        "--store",
        &ws.path("store"),
        "--params",
        "vp_fit",
        "--out",
        &ws.path("out"),
        "--components",
        "10",
        "--epochs",
        "10",
        "--points",
        "33",
        "--svg",
    ];
    let out = run(&args);
    assert!(out.status.success(), "report failed: {}", stderr_line(&out));
    let text = stdout_text(&out);
    for name in [
        "out/stats.json",
        "out/stats.csv",
        "out/boxplot_vp_fit.svg",
        "out/models/vp_fit_0.2-0.3AU.json",
        "out/models/vp_fit_0.6-0.7AU.json",
        "out/curves_vp_fit_0.2-0.3AU.csv",
        "out/curves_vp_fit_0.2-0.3AU.svg",
        "out/anomaly_vp_fit_0.2-0.3AU.json",
        "out/anomaly_vp_fit_0.6-0.7AU.json",
    ] {
        assert!(ws.root.join(name).exists(), "missing {name}\nstdout:\n{text}");
    }
    // Bins with no valid rows are skipped with a notice, not an error.
    assert!(text.contains("skipping vp_fit 0-0.1AU: no valid rows"), "stdout:\n{text}");

    // The whole pipeline is deterministic, so a fresh run into another
    // directory produces identical bytes.
    let rerun: Vec<String> = args
        .iter()
        .map(|s| s.replace(&ws.path("out"), &ws.path("out2")))
        .collect();
    let rerun_refs: Vec<&str> = rerun.iter().map(|s| s.as_str()).collect();
    let second = run(&rerun_refs);
    assert!(second.status.success(), "rerun failed: {}", stderr_line(&second));
    for name in [
        "stats.json",
        "models/vp_fit_0.2-0.3AU.json",
        "curves_vp_fit_0.2-0.3AU.csv",
        "anomaly_vp_fit_0.6-0.7AU.json",
    ] {
        let a = std::fs::read(ws.root.join("out").join(name)).unwrap();
        let b = std::fs::read(ws.root.join("out2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }
}

#[test]
fn low_density_anomaly_uses_training_data() {
    let ws = Workspace::with_store(900);
    let fit = run(&[
        "fit",
        "--store",
        &ws.path("store"),
        "--param",
        "vp_fit",
        "--bin",
        "0.6-0.7",
        "--out",
        &ws.path("out"),
        "--components",
        "12",
        "--epochs",
        "15",
    ]);
    assert!(fit.status.success(), "fit failed: {}", stderr_line(&fit));
    let model = ws.path("out/models/vp_fit_0.6-0.7AU.json");
    let out = run(&[
        "anomaly",
        "--model",
        &model,
        "--mode",
        "low-density",
        "--alpha",
        "0.05",
        "--store",
        &ws.path("store"),
        "--bin",
        "0.6-0.7",
        "--out",
        &ws.path("out"),
    ]);
    assert!(out.status.success(), "anomaly failed: {}", stderr_line(&out));
    let text = std::fs::read_to_string(ws.root.join("out/anomaly_vp_fit_0.6-0.7AU.json")).unwrap();
    assert!(text.contains("\"density_floor\""), "thresholds: {text}");
}
