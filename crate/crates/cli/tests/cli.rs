use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coughscreen")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn synth(dir: &Path) {
    let out = run(&["synth", "--out", dir.to_str().unwrap(), "--participants", "6", "--clips-max", "2", "--clips-min", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let out = run(&["crossvalidate", "--experiment", "cough-video"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_family_is_a_config_error() {
    let out = run(&["crossvalidate", "--families", "svm"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_manifest_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = run(&["extract", "--manifest", missing.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 4);
}

#[test]
fn manifest_without_label_column_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m.csv");
    fs::write(&m, "clip_id,file_path,participant_id\nc1,a.wav,p1\n").unwrap();
    let out = run(&["extract", "--manifest", m.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn corrupt_audio_exits_with_extraction_code() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    fs::write(data.join("audio/P000_c00.wav"), b"junk").unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "extract",
        "--manifest",
        data.join("manifest.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 5);
    assert!(out_dir.join("extraction_errors.csv").exists());
}

#[test]
fn extract_writes_feature_table() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "extract",
        "--manifest",
        data.join("manifest.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("features.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 13);
}
