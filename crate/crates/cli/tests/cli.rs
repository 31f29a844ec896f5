use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fillroute")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn small_store(dir: &Path, seed: &str) -> String {
    let s = dir.display().to_string();
    ok(&["gen-instance", "--out", &s, "--containers", "30", "--small-only", "2", "--months", "3", "--seed", seed]);
    ok(&["build-matrix", "--store", &s]);
    s
}

#[test]
fn gen_instance_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_store(&dir.path().join("a"), "3");
    let b = small_store(&dir.path().join("b"), "3");
    for name in ["containers.csv", "vehicles.csv", "history.csv", "depot.json", "matrix/distance.csv"] {
        let x = std::fs::read(Path::new(&a).join(name)).unwrap();
        let y = std::fs::read(Path::new(&b).join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let c = small_store(&dir.path().join("c"), "4");
    assert_ne!(
        std::fs::read(Path::new(&a).join("history.csv")).unwrap(),
        std::fs::read(Path::new(&c).join("history.csv")).unwrap()
    );
}

#[test]
fn default_seed_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s").display().to_string();
    let o = run(&["gen-instance", "--out", &out, "--containers", "20", "--small-only", "1", "--months", "1"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed: 7"));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 7);
}

#[test]
fn zero_months_gives_header_only_history() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let v = ok(&["gen-instance", "--out", &out.display().to_string(), "--containers", "10", "--small-only", "1", "--months", "0"]);
    assert_eq!(v["history_records"], 0);
    let text = std::fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(text.lines().count(), 1, "{text}");
}

#[test]
fn plan_writes_exports() {
    let dir = tempfile::tempdir().unwrap();
    let store = small_store(&dir.path().join("s"), "3");
    let out = dir.path().join("out");
    let v = ok(&[
        "plan", "--store", &store, "--date", "2025-04-01", "--model", "linear", "--iterations", "500", "--out",
        &out.display().to_string(),
    ]);
    let id = v["plan_id"].as_str().unwrap();
    let doc: Value = serde_json::from_slice(&std::fs::read(out.join("plan.json")).unwrap()).unwrap();
    assert_eq!(doc["plan_id"], id);
    let geo: Value = serde_json::from_slice(&std::fs::read(out.join("plan.geojson")).unwrap()).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 502, "header plus 501 entries");

    // Rerunning the same request reuses the stored plan.
    let again = ok(&["plan", "--store", &store, "--date", "2025-04-01", "--model", "linear", "--iterations", "500"]);
    assert_eq!(again["plan_id"], id);
    assert_eq!(again["reused"], true);

    let routes = v["routes"].as_array().unwrap();
    assert!(!routes.is_empty());
    let baseline = dir.path().join("baseline.csv");
    let plan_routes: Vec<Value> = doc["solution"]["routes"].as_array().unwrap().clone();
    let mut text = String::from("vehicle_id,container_ids\n");
    for r in &plan_routes {
        let ids: Vec<&str> = r["containers"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
        if !ids.is_empty() {
            let mut rev = ids.clone();
            rev.reverse();
            text.push_str(&format!("{},{}\n", r["vehicle_id"].as_str().unwrap(), rev.join(",")));
        }
    }
    std::fs::write(&baseline, text).unwrap();
    let cmp = ok(&[
        "compare", "--store", &store, "--plan", id, "--baseline", &baseline.display().to_string(), "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(cmp["overlap_pct"], 100.0);
    assert!(out.join("comparison.json").exists());
}

#[test]
fn backtest_and_forecast_tables() {
    let dir = tempfile::tempdir().unwrap();
    let store = small_store(&dir.path().join("s"), "3");
    let out = dir.path().join("out").display().to_string();
    let v = ok(&["backtest", "--store", &store, "--model", "linear", "--horizon", "14", "--out", &out]);
    assert_eq!(v["horizon"], 14);
    let table = std::fs::read_to_string(dir.path().join("out/backtest_linear.csv")).unwrap();
    assert_eq!(table.lines().next().unwrap(), "container_id,days,model_mae,baseline_mae");
    assert_eq!(table.lines().count(), 1 + v["containers"].as_array().unwrap().len());

    let f = ok(&["forecast", "--store", &store, "--date", "2025-04-01", "--horizon", "2", "--model", "linear", "--out", &out]);
    assert_eq!(f["forecasts"], 60);
    let csv = std::fs::read_to_string(dir.path().join("out/forecasts.csv")).unwrap();
    assert_eq!(csv.lines().count(), 61);
}

#[test]
fn solve_oracle_small_and_too_large() {
    let dir = tempfile::tempdir().unwrap();
    let store = small_store(&dir.path().join("s"), "3");
    let v = ok(&["solve-oracle", "--store", &store, "--containers", "C001,C002,C003,C004", "--iterations", "2000"]);
    assert_eq!(v["containers"], 4);
    assert!(v["solve_fitness"].as_f64().unwrap() >= v["oracle_fitness"].as_f64().unwrap() - 1e-9);

    let o = run(&["solve-oracle", "--store", &store, "--containers", "C001,C002,C003,C004,C005,C006,C007,C008,C009"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("instance too large"));
    let o = run(&["solve-oracle", "--store", &store, "--all-containers"]);
    assert!(!o.status.success());
}

#[test]
fn bad_input_fails_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope").display().to_string();
    for args in [
        vec!["plan", "--store", missing.as_str(), "--date", "2025-04-01"],
        vec!["plan", "--store", missing.as_str(), "--date", "not-a-date"],
        vec!["compare", "--store", missing.as_str(), "--plan", "abc", "--baseline", "x.csv"],
    ] {
        let o = run(&args);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let store = small_store(&dir.path().join("s"), "3");
    std::fs::remove_dir_all(Path::new(&store).join("matrix")).unwrap();
    let o = run(&["plan", "--store", &store, "--date", "2025-04-01", "--model", "linear"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("matrix"));
    let o = run(&["plan", "--store", &store, "--date", "2025-04-01", "--optional-threshold", "1.5"]);
    assert!(!o.status.success());
}
