use std::path::{Path, PathBuf};

fn smoke_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/smoke.toml")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("brownfield").chain(args.iter().copied());
    let code = brownfield_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn savings_prints_the_yearly_figures() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["savings", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("8,550,000"), "{out}");
    assert!(out.contains("5,985,000"), "{out}");
    let csv = std::fs::read_to_string(dir.path().join("savings/savings.csv")).unwrap();
    assert!(csv.contains("5985000"), "{csv}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let (code, _, err) = run(&["frobnicate"]);
    assert_eq!(code, 1);
    assert!(!err.is_empty());
}

#[test]
fn help_exits_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("run-all"), "{out}");
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[segnet]\nmc_samples = 0\n").unwrap();
    let (code, _, err) = run(&["savings", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1, "{err}");
    std::fs::write(&cfg, "no_such_key = 3\n").unwrap();
    let (code, _, _) = run(&["savings", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn missing_config_file_is_reported() {
    let (code, _, err) = run(&["savings", "--config", "/nonexistent/brownfield.toml"]);
    assert_ne!(code, 0);
    assert!(err.contains("/nonexistent/brownfield.toml"), "{err}");
}

#[test]
fn segment_without_checkpoint_fails_clearly() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cfg = smoke_config();
    let (code, _, _) = run(&["synth", "--config", cfg.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(code, 0);
    let (code, _, err) = run(&["segment", "--config", cfg.to_str().unwrap(), "--out", out_dir]);
    assert_eq!(code, 2);
    assert!(err.contains("checkpoint missing"), "{err}");
}

#[test]
fn quality_without_inputs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "quality",
        "--out",
        dir.path().to_str().unwrap(),
        "--measured",
        "/nonexistent/a.xyzl",
        "--reference",
        "/nonexistent/b.xyzl",
    ]);
    assert_ne!(code, 0);
    assert!(err.contains("a.xyzl"), "{err}");
}

#[test]
fn run_all_resumes_and_force_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let cfg = smoke_config();
    let cfg = cfg.to_str().unwrap();
    let (code, _, err) = run(&["run-all", "--config", cfg, "--out", out_dir]);
    assert_eq!(code, 0, "{err}");
    for path in [
        "train/model.ckpt",
        "train/metrics.csv",
        "segment/segmentation.csv",
        "uncertainty/summary.csv",
        "export/test_00.aml",
        "quality/quality.csv",
        "savings/savings.csv",
        "manifests/train.json",
    ] {
        assert!(dir.path().join(path).exists(), "{path}");
    }

    let (code, out, _) = run(&["run-all", "--config", cfg, "--out", out_dir]);
    assert_eq!(code, 0);
    assert!(out.contains("[train] up to date, skipped"), "{out}");
    assert!(out.contains("[pose] up to date, skipped"), "{out}");

    let (code, out, _) = run(&["train", "--config", cfg, "--out", out_dir, "--force"]);
    assert_eq!(code, 0);
    assert!(!out.contains("skipped"), "{out}");

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifests/train.json")).unwrap()).unwrap();
    assert_eq!(manifest["stage"], "train");
    assert_eq!(manifest["seed"], 1);
    assert!(manifest["timings"]["total"].as_f64().unwrap() >= 0.0);
}

#[test]
fn changed_seed_invalidates_stages() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let (code, _, _) = run(&["synth", "--out", out_dir, "--seed", "3", "--config", smoke_config().to_str().unwrap()]);
    assert_eq!(code, 0);
    let (_, out, _) = run(&["synth", "--out", out_dir, "--seed", "4", "--config", smoke_config().to_str().unwrap()]);
    assert!(!out.contains("skipped"), "{out}");
}
