//! End-to-end smoke tests of the installed binary: every subcommand is
//! exercised through `std::process::Command`, and the documented exit codes
//! are checked for the common failure shapes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cavdet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavdet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary launches")
}

fn assert_success(output: &Output, context: &str) {
    assert!(
        output.status.success(),
        "{context} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process exited normally")
}

/// Generate a small dataset and return its manifest path.
fn synth_small(dir: &Path) -> PathBuf {
    let data = dir.join("data");
    let output = cavdet(
        &[
            "synth",
            "--out",
            data.to_str().unwrap(),
            "--signals-per-class",
            "3",
            "--length",
            "4096",
            "--seed",
            "7",
        ],
        dir,
    );
    assert_success(&output, "synth");
    let manifest = data.join("manifest.json");
    assert!(manifest.is_file(), "synth writes a manifest");
    manifest
}

#[test]
fn run_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path());
    let out = dir.path().join("out");

    let config = serde_json::json!({
        "manifest": manifest,
        "out_dir": out,
        "window_size": 512,
        "correlation_segments": 4,
        "gbt": { "num_rounds": 30 }
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let output = cavdet(&["run", "--config", config_path.to_str().unwrap()], dir.path());
    assert_success(&output, "run");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("accuracy"), "missing headline: {stdout}");
    assert!(stdout.contains("binary task"));

    for name in [
        "features_train.csv",
        "features_test.csv",
        "model.json",
        "eval.json",
        "predictions.csv",
        "roc.csv",
        "confusion.csv",
        "roc.svg",
        "confusion.svg",
        "asfe_report.json",
        "run.log",
    ] {
        assert!(out.join(name).is_file(), "missing artifact {name}");
    }
}

#[test]
fn run_rejects_invalid_and_unparseable_configs() {
    let dir = tempfile::tempdir().unwrap();

    // Structurally valid JSON with an impossible setting: config error, 2.
    let invalid = dir.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{ "manifest": "m.json", "out_dir": "out", "window_size": 0 }"#,
    )
    .unwrap();
    let output = cavdet(&["run", "--config", invalid.to_str().unwrap()], dir.path());
    assert_eq!(exit_code(&output), 2, "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stderr).contains("window_size"));

    // Broken JSON: parse error, 3.
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let output = cavdet(&["run", "--config", broken.to_str().unwrap()], dir.path());
    assert_eq!(exit_code(&output), 3, "{}", String::from_utf8_lossy(&output.stderr));
}

#[test]
fn stage_commands_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path());
    let segments = dir.path().join("segments");
    let features = dir.path().join("features.csv");
    let model = dir.path().join("model.json");
    let predictions = dir.path().join("predictions.csv");
    let eval_dir = dir.path().join("eval");

    let output = cavdet(
        &[
            "segment",
            "--manifest",
            manifest.to_str().unwrap(),
            "--out",
            segments.to_str().unwrap(),
            "--window-size",
            "1024",
        ],
        dir.path(),
    );
    assert_success(&output, "segment");
    assert!(segments.join("index.csv").is_file());
    assert!(segments.join("segment_meta.json").is_file());
    assert!(segments.join("windows").is_dir());

    let output = cavdet(
        &[
            "featurize",
            "--segments",
            segments.to_str().unwrap(),
            "--out",
            features.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_success(&output, "featurize");
    let header = std::fs::read_to_string(&features).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("parent_id,window_index,partition"));
    assert!(header.contains(",mean,") && header.contains(",crest_factor,"));

    let output = cavdet(
        &[
            "train",
            "--features",
            features.to_str().unwrap(),
            "--out",
            model.to_str().unwrap(),
            "--task",
            "four_class",
            "--num-rounds",
            "20",
        ],
        dir.path(),
    );
    assert_success(&output, "train");
    assert!(model.is_file());

    let output = cavdet(
        &[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--features",
            features.to_str().unwrap(),
            "--out",
            predictions.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_success(&output, "predict");
    let predictions_text = std::fs::read_to_string(&predictions).unwrap();
    assert!(predictions_text.starts_with("parent_id,window_index,actual,predicted"));

    let output = cavdet(
        &[
            "evaluate",
            "--model",
            model.to_str().unwrap(),
            "--features",
            features.to_str().unwrap(),
            "--out",
            eval_dir.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_success(&output, "evaluate");
    for name in ["eval.json", "roc.csv", "confusion.csv", "roc.svg", "confusion.svg"] {
        assert!(eval_dir.join(name).is_file(), "missing {name}");
    }
}

#[test]
fn predict_rejects_mismatched_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path());
    let segments = dir.path().join("segments");
    let features = dir.path().join("features.csv");
    let model = dir.path().join("model.json");

    assert_success(
        &cavdet(
            &[
                "segment",
                "--manifest",
                manifest.to_str().unwrap(),
                "--out",
                segments.to_str().unwrap(),
                "--window-size",
                "1024",
            ],
            dir.path(),
        ),
        "segment",
    );
    assert_success(
        &cavdet(
            &[
                "featurize",
                "--segments",
                segments.to_str().unwrap(),
                "--out",
                features.to_str().unwrap(),
            ],
            dir.path(),
        ),
        "featurize",
    );
    assert_success(
        &cavdet(
            &[
                "train",
                "--features",
                features.to_str().unwrap(),
                "--out",
                model.to_str().unwrap(),
                "--num-rounds",
                "10",
            ],
            dir.path(),
        ),
        "train",
    );

    // Rename one feature column; the model can no longer find it by name.
    let text = std::fs::read_to_string(&features).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().replacen(",mean,", ",renamed,", 1);
    let mut mangled = header;
    for line in lines {
        mangled.push('\n');
        mangled.push_str(line);
    }
    mangled.push('\n');
    let other = dir.path().join("renamed.csv");
    std::fs::write(&other, mangled).unwrap();

    let output = cavdet(
        &[
            "predict",
            "--model",
            model.to_str().unwrap(),
            "--features",
            other.to_str().unwrap(),
            "--out",
            dir.path().join("p.csv").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(
        exit_code(&output),
        3,
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(String::from_utf8_lossy(&output.stderr).contains("mean"));
}

#[test]
fn sweep_writes_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth_small(dir.path());
    let out = dir.path().join("sweep");

    let config = serde_json::json!({
        "manifest": manifest,
        "out_dir": out,
        "window_size": 512,
        "correlation_segments": 0,
        "gbt": { "num_rounds": 15 },
        "asfe": { "probe": { "num_rounds": 15 } }
    });
    let config_path = dir.path().join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();

    let output = cavdet(
        &[
            "sweep",
            "--config",
            config_path.to_str().unwrap(),
            "--windows",
            "512,1024",
            "--ks",
            "5",
        ],
        dir.path(),
    );
    assert_success(&output, "sweep");
    let grid = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(grid.starts_with("window_size,k,"));
    // Header plus one row per (window, k) combination.
    assert_eq!(grid.lines().count(), 3, "grid:\n{grid}");
}