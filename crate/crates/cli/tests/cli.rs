use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_behavior-probe"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path) -> String {
    let o = bin(&["synth", dir.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("run.toml").to_string_lossy().into_owned()
}

#[test]
fn full_run_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());

    let o = bin(&["validate", &cfg]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("ok"));

    // Nothing predicted yet.
    assert_eq!(code(&bin(&["evaluate", &cfg])), 3);
    assert_eq!(code(&bin(&["report", &cfg])), 3);

    let o = bin(&["predict", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("2000 record(s) in 24 file(s)"));
    let o = bin(&["predict", &cfg]);
    assert!(stdout(&o).contains(", 0 backend call(s)"), "{}", stdout(&o));

    let o = bin(&["evaluate", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("bargaining"));
    let report = dir.path().join("out/report");
    for name in ["report.json", "families.txt", "sensitivity.txt", "ne.txt", "scatter.csv"] {
        assert!(report.join(name).exists(), "{name} missing");
    }

    let o = bin(&["report", &cfg]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("== per_pair.txt"));

    let o = bin(&["sensitivity", &cfg]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("mass \\ corr"));

    let o = bin(&["ne", &cfg]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).is_empty());
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    fs::write(dir.path().join("templates/chatml.toml"), "name = \"chatml\"\nmodels = []\n").unwrap();
    let o = bin(&["validate", &cfg]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("synth-a-chat") && err.contains("synth-b-chat"), "{err}");
    assert_eq!(code(&bin(&["predict", &cfg])), 1);

    let bogus = dir.path().join("bogus.toml");
    fs::write(&bogus, "seed = 1\nunknown_key = 2\n").unwrap();
    assert_eq!(code(&bin(&["validate", bogus.to_str().unwrap()])), 1);
    assert_eq!(code(&bin(&["validate", "/does/not/exist.toml"])), 1);
}

#[test]
fn scoped_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let o = bin(&[
        "predict",
        &cfg,
        "--family",
        "lottery",
        "--model",
        "synth-a-base",
        "--format",
        "standard",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("60 record(s) in 1 file(s)"), "{}", stdout(&o));
    assert!(dir
        .path()
        .join("out/predictions/lottery/standard/standard/synth-a-base.jsonl")
        .exists());
}
