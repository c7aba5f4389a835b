use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn repseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repseg")).args(args).output().expect("binary runs")
}

fn error_kind(out: &Output) -> String {
    let record: serde_json::Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON error record");
    record["error"].as_str().unwrap().to_string()
}

fn synth(dir: &Path, n: &str) {
    let out = repseg(&["synth", "--output", dir.to_str().unwrap(), "--n", n, "--seed", "5", "--min-reps", "2", "--max-reps", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, "3");
    synth(&b, "3");
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3 * 3 + 1);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn gradcheck_passes() {
    let out = repseg(&["gradcheck", "--layers", "2", "--head", "density"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["max_rel_error"].as_f64().unwrap() < 1e-4);
    assert_eq!(report["configs"].as_array().unwrap().len(), 2);
}

#[test]
fn train_then_segment_checks_the_head() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "4");
    let ck = tmp.path().join("model.json");
    let out = repseg(&[
        "train", "--data", data.to_str().unwrap(), "--head", "density", "--epochs", "1", "--hidden", "8",
        "--checkpoint", ck.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let input = data.join("synth_0000.csv");

    let out = repseg(&["segment", "--checkpoint", ck.to_str().unwrap(), "--input", input.to_str().unwrap(), "--head", "density"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let seg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(seg["segments"].is_array());

    let out = repseg(&["segment", "--checkpoint", ck.to_str().unwrap(), "--input", input.to_str().unwrap(), "--head", "count"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_kind(&out), "HeadMismatch");
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(repseg(&["train", "--epochs", "many", "--checkpoint", "x"]).status.code(), Some(2));
    assert_eq!(repseg(&["frobnicate"]).status.code(), Some(2));
    let out = repseg(&["eval", "--folds", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "InvalidConfig");
}

#[test]
fn malformed_data_exits_with_data_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data, "2");
    fs::write(data.join("synth_0001.csv"), "frame,joint_0_x\n0,not-a-number\n").unwrap();
    let out = repseg(&["ingest", "--input", data.to_str().unwrap(), "--output", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!error_kind(&out).is_empty());
}
