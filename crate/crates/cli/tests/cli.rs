use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn sackit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sackit"))
        .args(args)
        .current_dir(dir)
        .env_remove("SACKIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sackit(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn synth_then_build_model_smoke() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--n", "10", "--out", "c.sackit"]);
    ok(dir.path(), &["build-model", "--dataset", "c.sackit"]);
    assert!(dir.path().join("model.sackit").is_file());
}

#[test]
fn predict_prints_one_decimal_line() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["synth", "--n", "300", "--out", "c.sackit", "--seed", "1"]);
    ok(dir.path(), &["build-model", "--dataset", "c.sackit", "--out", "m.sackit"]);
    let stdout = ok(dir.path(), &["predict", "--model", "m.sackit", "--t", "30", "--d", "8.2"]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "{stdout:?}");
    let alpha: f64 = lines[0].parse().unwrap();
    assert!((5.0..=45.0).contains(&alpha));
    assert!(lines[0].contains('.'));
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let dir = TempDir::new().unwrap();
    let unknown = sackit(dir.path(), &["frobnicate"]);
    assert_eq!(code(&unknown), 1);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("Usage"));
    assert!(unknown.stdout.is_empty());

    assert_eq!(code(&sackit(dir.path(), &["predict", "--model", "m.sackit"])), 1);
    assert_eq!(code(&sackit(dir.path(), &["predict", "--model", "missing.sackit", "--t", "1", "--d", "1"])), 2);
    fs::write(dir.path().join("junk.sackit"), b"not a container").unwrap();
    assert_eq!(code(&sackit(dir.path(), &["build-model", "--dataset", "junk.sackit"])), 2);
    assert_eq!(code(&sackit(dir.path(), &["--help"])), 0);
    assert_eq!(code(&sackit(dir.path(), &["--version"])), 0);
}

#[test]
fn bad_config_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "[detection]\nv_detekt = 3.0\n").unwrap();
    let out = sackit(dir.path(), &["--config", "bad.toml", "synth", "--n", "5", "--out", "c.sackit"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("v_detekt"));
    assert!(!dir.path().join("c.sackit").exists());
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.toml"), "[synth]\nseed = 11\n").unwrap();
    ok(d, &["synth", "--n", "20", "--out", "default.sackit"]);
    ok(d, &["synth", "--n", "20", "--out", "seed0.sackit", "--seed", "0"]);
    ok(d, &["--config", "cfg.toml", "synth", "--n", "20", "--out", "file.sackit"]);
    ok(d, &["synth", "--n", "20", "--out", "seed11.sackit", "--seed", "11"]);
    ok(d, &["--config", "cfg.toml", "synth", "--n", "20", "--out", "flag.sackit", "--seed", "0"]);
    let read = |n: &str| fs::read(d.join(n)).unwrap();
    assert_eq!(read("default.sackit"), read("seed0.sackit"));
    assert_eq!(read("file.sackit"), read("seed11.sackit"));
    assert_eq!(read("flag.sackit"), read("seed0.sackit"));
    assert_ne!(read("file.sackit"), read("seed0.sackit"));

    let via_env = Command::new(env!("CARGO_BIN_EXE_sackit"))
        .args(["synth", "--n", "20", "--out", "env.sackit"])
        .current_dir(d)
        .env("SACKIT_CONFIG", d.join("cfg.toml"))
        .status()
        .unwrap();
    assert!(via_env.success());
    assert_eq!(read("env.sackit"), read("seed11.sackit"));
}

#[test]
fn seeded_commands_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    for name in ["a", "b"] {
        ok(
            d,
            &[
                "synth",
                "--n",
                "40",
                "--out",
                &format!("{name}.sackit"),
                "--truth",
                &format!("{name}.jsonl"),
                "--seed",
                "5",
            ],
        );
    }
    assert_eq!(fs::read(d.join("a.sackit")).unwrap(), fs::read(d.join("b.sackit")).unwrap());
    assert_eq!(fs::read(d.join("a.jsonl")).unwrap(), fs::read(d.join("b.jsonl")).unwrap());

    ok(d, &["synth", "--n", "400", "--out", "c.sackit", "--vertical-gamma", "1.15", "--seed", "2"]);
    let args = |out: &str| {
        vec![
            "sweep".to_string(),
            "--dataset".into(),
            "c.sackit".into(),
            "--test-size".into(),
            "20".into(),
            "--pool-size".into(),
            "30".into(),
            "--n".into(),
            "5,30".into(),
            "--reps".into(),
            "3".into(),
            "--seed".into(),
            "4".into(),
            "--strategy".into(),
            "average,model-shear".into(),
            "--out".into(),
            out.into(),
        ]
    };
    for out in ["s1.csv", "s2.csv"] {
        let a = args(out);
        ok(d, &a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let csv = fs::read_to_string(d.join("s1.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(d.join("s2.csv")).unwrap());
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("strategy,n,reps,failures,mean_mae"));
}

#[test]
fn pipeline_leaves_inputs_untouched() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "500", "--out", "c.sackit", "--vertical-gamma", "1.15", "--seed", "3"]);
    ok(
        d,
        &[
            "synth",
            "--n",
            "60",
            "--out",
            "cal.sackit",
            "--vertical-gamma",
            "1.15",
            "--vertical-weight",
            "1",
            "--seed",
            "4",
        ],
    );
    let before = fs::read(d.join("c.sackit")).unwrap();
    let cal_before = fs::read(d.join("cal.sackit")).unwrap();

    ok(d, &["build-model", "--dataset", "c.sackit", "--out", "m.sackit"]);
    ok(
        d,
        &[
            "shear-model",
            "--model",
            "m.sackit",
            "--target",
            "cal.sackit",
            "--out",
            "ms.sackit",
            "--curve",
            "curve.json",
        ],
    );
    ok(
        d,
        &[
            "shear-data",
            "--dataset",
            "c.sackit",
            "--target",
            "cal.sackit",
            "--out",
            "sd.sackit",
            "--model",
            "sdm.sackit",
        ],
    );
    let base = ok(d, &["eval", "--model", "m.sackit", "--test", "cal.sackit", "--name", "average"]);
    let sheared =
        ok(d, &["eval", "--model", "ms.sackit", "--test", "cal.sackit", "--name", "model-shear", "--json", "e.json"]);

    let mae = |csv: &str| -> f64 { csv.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap() };
    assert!(mae(&sheared) < mae(&base), "second-half MAE {} vs {}", mae(&sheared), mae(&base));
    let curve: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("curve.json")).unwrap()).unwrap();
    assert!(curve["a"].is_number() && curve["b"].is_number() && curve["points"].is_array());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(report["models"][0]["name"], "model-shear");

    assert_eq!(fs::read(d.join("c.sackit")).unwrap(), before);
    assert_eq!(fs::read(d.join("cal.sackit")).unwrap(), cal_before);
    let clobber = sackit(d, &["build-model", "--dataset", "c.sackit", "--out", "c.sackit"]);
    assert_eq!(code(&clobber), 1);
    assert_eq!(fs::read(d.join("c.sackit")).unwrap(), before);
}

#[test]
fn means_dissimilarity_and_shear_fit() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "800", "--out", "c.sackit", "--vertical-gamma", "1.2", "--seed", "6"]);
    let table = ok(
        d,
        &["mean", "--dataset", "c.sackit", "--factor", "orientation", "--amplitude", "10,20", "--out", "o.sackit"],
    );
    assert_eq!(table.lines().count(), 5, "{table}");
    let dissim = ok(d, &["dissim", "--means", "o.sackit"]);
    let rows: Vec<&str> = dissim.lines().skip(1).collect();
    assert_eq!(rows.len(), 2, "{dissim}");
    assert!(rows
        .iter()
        .all(|r| r.starts_with("orientation,") && r.split(',').nth(3).unwrap().parse::<f64>().unwrap() > 0.0));

    ok(d, &["mean", "--dataset", "c.sackit", "--amplitude", "10,15,20,25,30", "--out", "all.sackit"]);
    ok(
        d,
        &[
            "mean",
            "--dataset",
            "c.sackit",
            "--factor",
            "orientation",
            "--amplitude",
            "10,15,20,25,30",
            "--out",
            "both.sackit",
        ],
    );
    let stdout = ok(d, &["shear-fit", "--original", "all.sackit", "--target", "both.sackit"]);
    let curve: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let lambdas: Vec<f64> = curve["points"].as_array().unwrap().iter().map(|p| p["lambda"].as_f64().unwrap()).collect();
    assert_eq!(lambdas.len(), 10);
    assert!(lambdas.iter().any(|&l| l > 0.0) && lambdas.iter().any(|&l| l < 0.0), "{lambdas:?}");
}

#[test]
fn stream_detection_and_online_prediction() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--n", "300", "--out", "c.sackit", "--seed", "8"]);
    ok(d, &["build-model", "--dataset", "c.sackit", "--out", "m.sackit"]);
    ok(d, &["synth", "--n", "6", "--stream", "s.jsonl", "--truth", "t.jsonl", "--seed", "9"]);
    ok(
        d,
        &[
            "detect",
            "--input",
            "s.jsonl",
            "--out",
            "det.sackit",
            "--traces",
            "tr.sackit",
            "--label",
            "orientation:horizontal",
        ],
    );
    assert!(d.join("det.sackit").is_file() && d.join("tr.sackit").is_file());

    let stdout = ok(d, &["predict-stream", "--model", "m.sackit", "--input", "s.jsonl"]);
    let rows: Vec<serde_json::Value> = stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(!rows.is_empty());
    for r in &rows {
        for key in ["t", "x", "y", "alpha"] {
            assert!(r[key].is_number(), "{r}");
        }
        assert!(r["flag"] == "high" || r["flag"] == "low");
    }
    let truth: Vec<serde_json::Value> =
        fs::read_to_string(d.join("t.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(truth.len(), 6);

    let mean = ok(
        d,
        &[
            "mean",
            "--dataset",
            "det.sackit",
            "--factor",
            "orientation",
            "--amplitude",
            "25",
            "--halfwidth",
            "25",
            "--out",
            "dm.sackit",
        ],
    );
    let profiles: usize = mean.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(profiles, 6);
}

#[test]
fn plot_data_writes_every_figure_table() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(
        d.join("small.toml"),
        "[experiment]\nsaccades = 600\ntest_size = 30\npool_size = 60\ncalibration = 10\n[experiment.sweep]\nn_values = [10, 60]\nreps = 2\n",
    )
    .unwrap();
    ok(d, &["--config", "small.toml", "plot-data", "--out-dir", "plots"]);
    for name in ["direction_shift_error.csv", "personalized_vs_model.csv", "users_shift_error.csv", "summary.json"] {
        let text = fs::read_to_string(d.join("plots").join(name)).unwrap();
        assert!(text.lines().count() > 1, "{name} is empty");
    }
    let users = fs::read_to_string(d.join("plots/users_shift_error.csv")).unwrap();
    assert_eq!(users.lines().count(), 6);
}
