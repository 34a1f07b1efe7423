use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn xrsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xrsim"))
        .args(args)
        .env_remove("XRSIM_OUT_DIR")
        .output()
        .expect("spawn xrsim")
}

fn ok(args: &[&str]) -> String {
    let out = xrsim(args);
    assert!(
        out.status.success(),
        "xrsim {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_traces_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let stdout = ok(&["run", "--policy", "threshold", "--variable", "--horizon", "30", "--seeds", "1,2", "--out", out]);
    assert!(stdout.contains("compliance_pct"));
    let dir = tmp.path().join("threshold-variable");
    for seed in ["seed-1", "seed-2"] {
        for f in ["decisions.csv", "frames.csv", "metrics.json", "timing.json"] {
            assert!(dir.join(seed).join(f).is_file(), "{seed}/{f}");
        }
    }
    let decisions = fs::read_to_string(dir.join("seed-1/decisions.csv")).unwrap();
    assert_eq!(decisions.lines().count(), 31);
    let summary = json(&dir.join("summary.json"));
    assert_eq!(summary["seeds"], serde_json::json!([1, 2]));
    assert!(dir.join("scenario.toml").is_file());
}

#[test]
fn metrics_reproduce_across_invocations() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["run", "--policy", "rl", "--variable", "--horizon", "40", "--seeds", "4", "--out", d.path().to_str().unwrap()]);
    }
    let rel = "rl-variable/seed-4/metrics.json";
    assert_eq!(
        fs::read_to_string(a.path().join(rel)).unwrap(),
        fs::read_to_string(b.path().join(rel)).unwrap()
    );
}

#[test]
fn aggregate_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["run", "--policy", "local", "--stable", "1000", "--horizon", "20", "--out", out]);
    let dir = tmp.path().join("local-stable-1000");

    let agg = tmp.path().join("agg");
    ok(&["aggregate", dir.to_str().unwrap(), "--out", agg.to_str().unwrap()]);
    let s = json(&agg.join("summary.json"));
    assert_eq!(s["seeds"], serde_json::json!([1, 2, 3]));
    assert_eq!(s["metrics"]["compliance_pct"]["median"], 100.0);

    let printed: serde_json::Value = serde_json::from_str(&ok(&["aggregate", dir.to_str().unwrap()])).unwrap();
    assert_eq!(printed["metrics"], s["metrics"]);

    ok(&["report", dir.to_str().unwrap(), "--window", "5"]);
    let series = fs::read_to_string(dir.join("seed-1/mode_fraction.csv")).unwrap();
    assert!(series.starts_with("t,bandwidth,local_fraction"));
    assert_eq!(series.lines().count(), 21);
    assert!(dir.join("seed-2/per_bandwidth.csv").is_file());
}

#[test]
fn scenario_file_and_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = tmp.path().join("s.toml");
    fs::write(
        &scenario,
        "name = \"tiny\"\npolicy = \"rl\"\nseeds = [1]\n\n[profile]\nkind = \"cyclic\"\nlevels = [100, 1]\ndwell_s = 5\n\n[env]\nhorizon_s = 20\n",
    )
    .unwrap();
    let out = tmp.path().to_str().unwrap();
    let stdout = ok(&["sweep", "--scenario", scenario.to_str().unwrap(), "--lambda", "0.5,2", "--out", out]);
    assert!(stdout.contains("lambda"));
    let table = fs::read_to_string(tmp.path().join("sweep-tiny/sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("factor,value,compliance_median"));
}

#[test]
fn bad_input_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    assert!(!xrsim(&["run", "--policy", "random", "--out", out]).status.success());
    let r = xrsim(&["run", "--stable", "-5", "--out", out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error"));
    assert!(!xrsim(&["sweep", "--out", out]).status.success());
    assert!(!xrsim(&["aggregate", tmp.path().join("missing").to_str().unwrap()]).status.success());
    assert!(!xrsim(&["report", out]).status.success());
}
