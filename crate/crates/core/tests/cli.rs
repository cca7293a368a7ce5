use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rosc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rosc")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn generate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["generate", "--N", "20", "--T", "60", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    rosc(&args)
}

#[test]
fn generate_is_byte_identical_per_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        assert_eq!(code(&generate(dir.path(), &["--seed", "4"])), 0);
    }
    for f in ["trace.csv", "trace.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let c = tempfile::tempdir().unwrap();
    generate(c.path(), &["--seed", "5"]);
    assert_ne!(
        fs::read(a.path().join("trace.csv")).unwrap(),
        fs::read(c.path().join("trace.csv")).unwrap()
    );
}

#[test]
fn generate_reports_path_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), &["--model", "poisson", "--M", "2,4"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("M=2") && text.contains("M=4"), "{text}");
    assert!(dir.path().join("effective_config.json").exists());
}

#[test]
fn run_writes_record_and_config() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &[]);
    let trace = dir.path().join("trace.csv");
    let out_dir = dir.path().join("out");
    let args = [
        "run", "--policy", "rosc", "--trace", trace.to_str().unwrap(),
        "--M", "3", "--W", "4", "--K", "8", "--seed", "2", "--out", out_dir.to_str().unwrap(),
    ];
    assert_eq!(code(&rosc(&args)), 0);
    let first = fs::read(out_dir.join("rosc.csv")).unwrap();
    assert_eq!(code(&rosc(&args)), 0);
    assert_eq!(first, fs::read(out_dir.join("rosc.csv")).unwrap());
    let cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("effective_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["params"]["window"], 4);
    assert_eq!(cfg["params"]["capacity"], 3);
    assert!(out_dir.join("rosc.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &[]);
    let trace = dir.path().join("trace.csv");
    let t = trace.to_str().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();
    // unknown policy, missing trace, bad window
    assert_eq!(code(&rosc(&["run", "--policy", "lru", "--trace", t, "--out", o])), 2);
    assert_eq!(code(&rosc(&["run", "--policy", "rosc", "--trace", "/nonexistent.csv", "--out", o])), 1);
    assert_eq!(
        code(&rosc(&["bound", "--N", "5", "--T", "10", "--U", "3", "--H", "2", "--W", "0", "--M", "2"])),
        2
    );
    // exact solver over budget
    assert_eq!(code(&rosc(&["run", "--policy", "opt-dp", "--trace", t, "--out", o])), 3);
    assert_eq!(code(&rosc(&["sweep", "--seeds", "0", "--N", "10", "--T", "20", "--out", o])), 2);
}

#[test]
fn validate_prints_json() {
    let out = rosc(&[
        "validate", "--cases", "50", "--instances", "3", "--updates", "30", "--tiny", "1",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 4);
    assert_eq!(code(&rosc(&["validate", "--checks", "bogus"])), 2);
}

#[test]
fn bound_from_trace() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &[]);
    let trace = dir.path().join("trace.csv");
    let out = rosc(&["bound", "--trace", trace.to_str().unwrap(), "--M", "3"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let b = &v["bound"];
    let sum = b["gradient_term"].as_f64().unwrap() + b["rounding_term"].as_f64().unwrap() + b["path_term"].as_f64().unwrap();
    assert!((sum - b["total"].as_f64().unwrap()).abs() < 1e-9 * sum);
    assert_eq!(v["N"], 20);
}

#[test]
fn sweep_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("s");
    let out = rosc(&[
        "sweep", "--N", "20", "--T", "50", "--seeds", "2", "--axis", "W", "--values", "1,3",
        "--policies", "rosc,sopt", "--out", o.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.json", "costs_W.csv", "runtimes.csv", "effective_config.json"] {
        assert!(o.join(f).exists(), "{f}");
    }
    let costs = fs::read_to_string(o.join("costs_W.csv")).unwrap();
    assert_eq!(costs.lines().count(), 1 + 2 * 2);
}

#[test]
fn zero_rate_poisson_warns() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), &["--model", "poisson", "--groups", "5", "--birth-rate", "0"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let trace = rosc::ArrivalTrace::read_csv(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.total_requests(), 0.0);
}

#[test]
fn run_without_predictions() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), &[]);
    let trace = dir.path().join("trace.csv");
    let out = rosc(&[
        "run", "--policy", "rosc", "--trace", trace.to_str().unwrap(), "--W", "0", "--K", "10",
        "--out", dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}
