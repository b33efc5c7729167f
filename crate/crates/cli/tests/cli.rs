//! CLI behavior: exit codes, validation-before-write, and config/flag
//! precedence.

use std::path::Path;
use std::process::Command;

fn feye() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_feye"));
    cmd.env("RUST_LOG", "warn");
    cmd
}

#[test]
fn unknown_subcommand_exits_2() {
    let output = feye().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("Usage") || stderr.contains("usage"), "{stderr}");
}

#[test]
fn unknown_flag_exits_2() {
    let output = feye()
        .args(["distortion-curve", "--frob", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn validation_failure_exits_1_with_one_line_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let output = feye()
        .args(["extract", "--manifest"])
        .arg(dir.path().join("missing.toml"))
        .args(["--scheme", "standard", "--out"])
        .arg(dir.path().join("out.fepp"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    let error_lines: Vec<&str> = stderr.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(error_lines.len(), 1, "stderr: {stderr}");
}

fn gen_small(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let data = dir.join("data");
    let pool = dir.join("pool.fepp");
    let status = feye()
        .args(["gen", "--out-dir"])
        .arg(&data)
        .args(["--images", "16", "--seed", "3", "--patch-size", "16", "--pool"])
        .arg(&pool)
        .status()
        .unwrap();
    assert!(status.success());
    (data, pool)
}

#[test]
fn invalid_alpha_fails_without_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pool) = gen_small(dir.path());
    let ckpt = dir.path().join("model.feck");
    let curve = dir.path().join("curve.csv");
    let output = feye()
        .args(["pretrain", "--pool"])
        .arg(&pool)
        .args(["--alpha", "1.5", "--out"])
        .arg(&ckpt)
        .arg("--loss-curve")
        .arg(&curve)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!ckpt.exists(), "checkpoint written despite invalid config");
    assert!(!curve.exists(), "loss curve written despite invalid config");
}

#[test]
fn bad_scheme_fails_before_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("gen_out");
    let output = feye()
        .args(["gen", "--out-dir"])
        .arg(&out_dir)
        .args(["--images", "4", "--scheme", "hexagonal"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(!out_dir.exists(), "output dir created despite bad scheme");
}

#[test]
fn flags_override_config_file_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pool) = gen_small(dir.path());
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "seed = 3\n[loss]\nalpha = 0.25\ntemperature = 0.2\n[training]\nepochs = 2\nbatch_size = 16\n[model]\nhidden_dims = [32]\nrepresentation_dim = 16\nembedding_dim = 8\n",
    )
    .unwrap();

    // Config alone: alpha from the file.
    let ckpt_file = dir.path().join("from_file.feck");
    let status = feye()
        .args(["pretrain", "--pool"])
        .arg(&pool)
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&ckpt_file)
        .status()
        .unwrap();
    assert!(status.success());
    let (_, meta) = feye_core::load_checkpoint(&ckpt_file).unwrap();
    assert_eq!(meta.alpha, 0.25);
    assert_eq!(meta.temperature, 0.2);

    // Flag overrides the file.
    let ckpt_flag = dir.path().join("from_flag.feck");
    let status = feye()
        .args(["pretrain", "--pool"])
        .arg(&pool)
        .arg("--config")
        .arg(&config)
        .args(["--alpha", "0.75", "--out"])
        .arg(&ckpt_flag)
        .status()
        .unwrap();
    assert!(status.success());
    let (_, meta) = feye_core::load_checkpoint(&ckpt_flag).unwrap();
    assert_eq!(meta.alpha, 0.75);
    assert_eq!(meta.temperature, 0.2, "file value survives for untouched keys");
}

#[test]
fn distortion_curve_prints_csv_to_stdout() {
    let output = feye()
        .args(["distortion-curve", "--samples", "3"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "rho,distortion");
    assert_eq!(lines.len(), 4);
    let last: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((last[0] - 0.7072).abs() < 1e-12);
}

#[test]
fn feye_threads_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (threads, out) in [("1", &out_a), ("4", &out_b)] {
        let status = feye()
            .env("FEYE_THREADS", threads)
            .args(["gen", "--out-dir"])
            .arg(out)
            .args(["--images", "8", "--seed", "4"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    // Thread count must not change artifacts.
    let tally_a = std::fs::read(out_a.join("tally.csv")).unwrap();
    let tally_b = std::fs::read(out_b.join("tally.csv")).unwrap();
    assert_eq!(tally_a, tally_b);

    let bad = feye()
        .env("FEYE_THREADS", "not-a-number")
        .args(["distortion-curve", "--samples", "3"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn probe_requires_a_model_source() {
    let dir = tempfile::tempdir().unwrap();
    let (_, pool) = gen_small(dir.path());
    let output = feye().args(["probe", "--pool"]).arg(&pool).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--checkpoint") || stderr.contains("--random-init"));
}
