use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dbn-denoise");

fn mnist_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn small_flags(out: &Path) -> Vec<String> {
    [
        "--mnist-dir",
        mnist_dir().to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--widths",
        "784,24,12",
        "--epochs",
        "1",
        "--batch-size",
        "10",
        "--train-count",
        "60",
        "--test-count",
        "10",
        "--threshold",
        "0.9,0.5,0.2,0.05",
        "--seed",
        "3",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn with<'a>(cmd: &'a str, flags: &'a [String]) -> Vec<&'a str> {
    std::iter::once(cmd).chain(flags.iter().map(String::as_str)).collect()
}

#[test]
fn train_profile_denoise_round() {
    let dir = tempfile::tempdir().unwrap();
    let flags = small_flags(dir.path());

    let out = run(&with("train", &flags));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("model.dbnm").is_file());

    let out = run(&with("profile", &flags));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("threshold 0.9:"), "{stdout}");
    assert!(dir.path().join("profile.txt").is_file());

    let input = dir.path().join("in.pgm");
    let mut pgm = b"P5\n28 28\n255\n".to_vec();
    pgm.extend((0..784).map(|i| (i % 256) as u8));
    std::fs::write(&input, pgm).unwrap();
    let output = dir.path().join("out.pgm");
    let out = run(&[
        "denoise",
        "--out-dir",
        dir.path().to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bytes = std::fs::read(&output).unwrap();
    assert!(bytes.starts_with(b"P5\n28 28\n255\n"));
    assert_eq!(bytes.len(), 13 + 784);
}

#[test]
fn eval_prints_report_and_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(&config, "epochs = 7\nseed = 99\nnoise-variance = 0.1\n").unwrap();
    let mut flags = small_flags(&dir.path().join("out"));
    flags.extend(["--config".to_string(), config.to_str().unwrap().to_string()]);

    let out = run(&with("eval", &flags));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("epochs = 1"), "{report}");
    assert!(report.contains("seed = 3"));
    assert!(report.contains("noise-variance = 0.1"));
    assert!(report.contains("mse_denoised = "));
    let written = std::fs::read_to_string(dir.path().join("out/report.txt")).unwrap();
    assert_eq!(written, report);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["eval", "--mnist-dir", dir.path().to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("load"), "{stderr}");

    let out = run(&["eval", "--widths", "784,abc"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("widths"));

    let out = run(&["denoise", "--model", "/nonexistent/model.dbnm", "--input", "x.pgm", "--output", "y.pgm"]);
    assert!(!out.status.success());
}
