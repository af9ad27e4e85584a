use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lobrep::dataset::build_samples_with_labels;
use lobrep::ingest::{events_to_series, write_events, write_fi2010};
use lobrep::synth::{generate, SynthConfig};
use lobrep::tensor::{Sidecar, Tensor, TensorData};
use lobrep::{SampleSpec, Scheme};
use tempfile::TempDir;

fn lobrep(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lobrep")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = lobrep(args, cwd);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn events(dir: &Path, name: &str, seed: u64, n: usize) -> PathBuf {
    let path = dir.join(name);
    write_events(&generate(&SynthConfig { seed, events: n, ..SynthConfig::default() }).unwrap(), &path).unwrap();
    path
}

/// An ingested event stream plus its series cache.
fn series(dir: &Path, seed: u64) -> PathBuf {
    events(dir, "ev.csv", seed, 3000);
    ok(&["ingest", "--format", "events", "ev.csv", "-o", "s.json"], dir);
    dir.join("s.json")
}

#[test]
fn malformed_fi2010_row_exits_2_naming_the_row() {
    let dir = TempDir::new().unwrap();
    let s = events_to_series(&generate(&SynthConfig { seed: 1, events: 400, ..SynthConfig::default() }).unwrap(), 10)
        .unwrap();
    let path = dir.path().join("day.txt");
    write_fi2010(&s, &path).unwrap();
    let mut lines: Vec<String> = std::fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    lines[16] = lines[16].replacen(',', ",oops,", 1);
    std::fs::write(&path, lines.join("\n")).unwrap();

    let out = lobrep(&["ingest", "--format", "fi2010", "day.txt", "-o", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 17"), "{err}");
    assert!(!dir.path().join("c.json").exists());
}

#[test]
fn crossed_fi2010_row_exits_2() {
    let dir = TempDir::new().unwrap();
    let mut row: Vec<String> = Vec::new();
    for i in 0..10 {
        row.extend([format!("{}", 9.99 - 0.01 * i as f64), "10".into(), format!("{}", 10.0 - 0.01 * i as f64), "10".into()]);
    }
    std::fs::write(dir.path().join("x.txt"), row.join(" ") + "\n").unwrap();
    let out = lobrep(&["ingest", "x.txt", "-o", "c.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
}

#[test]
fn ingest_reuses_cache_until_input_changes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    events(d, "ev.csv", 2, 1500);
    let args = ["ingest", "--format", "events", "ev.csv", "-o", "s.json"];
    let first = ok(&args, d);
    assert!(first.contains("rows") && !first.contains("cached"));
    let bytes = std::fs::read(d.join("s.json")).unwrap();
    assert!(ok(&args, d).contains("(cached)"));
    assert_eq!(std::fs::read(d.join("s.json")).unwrap(), bytes);

    // different options or content invalidate the cache
    assert!(!ok(&["ingest", "--format", "events", "--levels", "5", "ev.csv", "-o", "s.json"], d).contains("cached"));
    events(d, "ev.csv", 3, 1500);
    assert!(!ok(&args, d).contains("cached"));
}

#[test]
fn represent_mw_window_shape() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    series(d, 4);
    ok(&["represent", "--series", "s.json", "--scheme", "mw", "--N", "10", "--W", "20", "-o", "mw.lobt"], d);
    let t = Tensor::read(&d.join("mw.lobt")).unwrap();
    assert_eq!(&t.dims[1..], &[10, 41]);
    let side = Sidecar::read(&d.join("mw.lobt")).unwrap();
    assert_eq!(side.shape, t.dims);
    let positions = side.extra["positions"].as_array().unwrap();
    assert_eq!(positions.len(), t.dims[0]);
    assert_eq!(positions[0].as_u64(), Some(9));

    ok(&["represent", "--series", "s.json", "--scheme", "level_based", "--N", "5", "-o", "lb.lobt"], d);
    assert_eq!(&Tensor::read(&d.join("lb.lobt")).unwrap().dims[1..], &[5, 40]);
}

#[test]
fn perturbed_labels_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    series(d, 5);
    for p in ["ask", "bid", "both"] {
        ok(&["perturb", "--series", "s.json", "--paradigm", p, "-o", "p.json"], d);
        ok(&["label", "--series", "s.json", "--horizon", "20", "-o", "a.csv"], d);
        ok(&["label", "--series", "p.json", "--horizon", "20", "-o", "b.csv"], d);
        assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
    }
    // the event route sees the full book and agrees on labels too
    ok(&["perturb", "--events", "ev.csv", "--paradigm", "both", "-o", "e.json"], d);
    ok(&["label", "--series", "e.json", "--horizon", "20", "-o", "c.csv"], d);
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("c.csv")).unwrap());
}

#[test]
fn export_round_trips_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    series(d, 6);
    ok(&["perturb", "--series", "s.json", "--paradigm", "bid", "-o", "p.json"], d);
    ok(
        &["export", "--series", "p.json", "--labels-from", "s.json", "--scheme", "smoothed_mw", "--split", "test", "-o", "x/t.lobt"],
        d,
    );
    let path = d.join("x/t.lobt");
    let bytes = std::fs::read(&path).unwrap();
    let t = Tensor::read(&path).unwrap();
    assert_eq!(t.to_bytes(), bytes);

    let side = Sidecar::read(&path).unwrap();
    assert_eq!((side.kind.as_str(), side.split.as_deref(), side.paradigm.as_deref()), ("features", Some("test"), Some("bid")));
    assert_eq!(side.classes, ["up", "stationary", "down"]);
    let lpath = side.resolve_label_file(&path).unwrap();
    let labels = Tensor::read(&lpath).unwrap();
    assert_eq!(labels.dims, vec![t.dims[0]]);

    // values match the library's own sample construction
    let read = |p: &str| -> lobrep::SnapshotSeries {
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join(p)).unwrap()).unwrap();
        serde_json::from_value(v["series"].clone()).unwrap()
    };
    let samples = build_samples_with_labels(&read("p.json"), &read("s.json"), &SampleSpec::new(Scheme::SmoothedMw)).unwrap();
    let expect: Vec<f32> = samples.data.inputs.iter().map(|&x| x as f32).collect();
    assert_eq!(t.data, TensorData::F32(expect));
    let ys: Vec<f32> = samples.data.labels.iter().map(|&y| y as f32).collect();
    assert_eq!(labels.data, TensorData::F32(ys));

    // rewriting what was read reproduces the file exactly
    t.write(&d.join("copy.lobt")).unwrap();
    assert_eq!(std::fs::read(d.join("copy.lobt")).unwrap(), bytes);
}

#[test]
fn evaluate_reproduces_training_metrics() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    series(d, 7);
    events(d, "test.csv", 8, 2000);
    ok(&["ingest", "--format", "events", "test.csv", "-o", "t.json"], d);
    ok(&["perturb", "--series", "t.json", "--paradigm", "both", "-o", "tp.json"], d);
    for (model, scheme) in [("linear", "accumulated_mw"), ("mlp", "level_based")] {
        ok(
            &[
                "train", "--train", "s.json", "--model", model, "--scheme", scheme, "--seed", "3", "--epochs", "2",
                "--horizon", "20", "--test", "tp.json", "--metrics", "m1.json", "-o", "ck.lobt",
            ],
            d,
        );
        ok(&["evaluate", "--checkpoint", "ck.lobt", "--series", "tp.json", "--labels-from", "t.json", "-o", "m2.json"], d);
        assert_eq!(std::fs::read(d.join("m1.json")).unwrap(), std::fs::read(d.join("m2.json")).unwrap());
    }
}

const GRID_CONFIG: &str = r#"
train_stride = 4
test_stride = 4
[label]
horizon = 20
[train]
max_epochs = 1
[data]
format = "events"
train = ["train.csv"]
test = ["test.csv"]
"#;

#[test]
fn grid_emits_every_cell_and_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    events(d, "train.csv", 9, 2500);
    events(d, "test.csv", 10, 1500);
    std::fs::write(d.join("grid.toml"), GRID_CONFIG).unwrap();
    let args = ["grid", "--config", "grid.toml", "--models", "linear,mlp", "--schemes", "all", "--paradigms", "all", "--seeds", "5"];
    ok(&[&args[..], &["-o", "a"]].concat(), d);
    ok(&[&args[..], &["-o", "b"]].concat(), d);

    let csv = std::fs::read_to_string(d.join("a/results.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2 * 4 * 4 * 5);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("ok")));
    assert!(csv.starts_with(lobrep::eval::RESULTS_HEADER));
    for f in ["results.csv", "summary.json", "table.txt", "confusion/mlp_mw_both.csv"] {
        assert_eq!(std::fs::read(d.join("a").join(f)).unwrap(), std::fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }

    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("a/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"].as_array().unwrap().len(), 2 * 4 * 4);
    assert_eq!(summary["config"]["train"]["max_epochs"], 1);
    assert_eq!(summary["config"]["train"]["batch_size"], 64);
    assert!(summary["summary"][0]["accuracy"]["std"].is_number());
}

#[test]
fn bad_config_and_missing_inputs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "seeds = [0\n").unwrap();
    assert_eq!(lobrep(&["grid", "--config", "bad.toml", "-o", "g"], d).status.code(), Some(2));
    std::fs::write(d.join("typo.toml"), "sedes = [0]\n").unwrap();
    assert_eq!(lobrep(&["grid", "--config", "typo.toml", "-o", "g"], d).status.code(), Some(2));
    assert_eq!(lobrep(&["label", "--series", "nope.json", "-o", "l.csv"], d).status.code(), Some(1));
    assert_eq!(lobrep(&["grid", "-o", "g"], d).status.code(), Some(1));
}
