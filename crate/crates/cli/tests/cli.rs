use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vna-entropy")).args(args).output().expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("vna-entropy-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn maximally_entangled_hmin_is_minus_one() {
    let out = run(&["entropy", "--op", "hmin", "--state", &fixture("maxent2.json"), "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!((r["result"]["value"].as_f64().unwrap() + 1.0).abs() < 1e-6);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["params"]["op"], "hmin");
    assert!(r.get("timestamp").is_none());
}

#[test]
fn copybit_exact_toeplitz_run() {
    let out = run(&[
        "pa",
        "--a",
        "3",
        "--b",
        "1",
        "--family",
        "toeplitz",
        "--mode",
        "exact",
        "--state",
        &fixture("copybit.json"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(&out);
    let res = &r["result"];
    assert_eq!(res["exact"], true);
    assert_eq!(res["members"], 8);
    assert!((res["hmin"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(res["avg_distance"].as_f64().unwrap() <= res["bound"].as_f64().unwrap());
    assert!(r["timestamp"].is_u64());
}

#[test]
fn identical_configs_give_identical_reports() {
    for args in [
        vec!["entropy", "--op", "hmax", "--generator", "ginibre", "--dims", "2,2", "--seed", "11"],
        vec!["dc", "--message-size", "2", "--generator", "cq-random", "--nx", "4", "--dims", "2", "--seed", "4"],
        vec![
            "pa",
            "--b",
            "1",
            "--mode",
            "sample",
            "--samples",
            "20",
            "--generator",
            "cq-random",
            "--nx",
            "8",
            "--seed",
            "2",
        ],
    ] {
        let args: Vec<&str> = args.into_iter().chain(["--no-timestamp"]).collect();
        let (a, b) = (run(&args), run(&args));
        assert_eq!(a.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn seed_changes_generated_state() {
    let base = ["entropy", "--generator", "ginibre", "--dims", "2,2", "--no-timestamp"];
    let v = |seed: &str| {
        let args: Vec<&str> = base.iter().copied().chain(["--seed", seed]).collect();
        report(&run(&args))["result"]["value"].as_f64().unwrap()
    };
    assert_ne!(v("1"), v("2"));
}

#[test]
fn config_file_with_overrides() {
    // the state path is relative to the config file
    let cfg = scratch("exp.json");
    std::fs::copy(fixture("copybit.json"), scratch("copybit.json")).unwrap();
    std::fs::write(
        &cfg,
        serde_json::json!({"command": "pa", "params": {"b": 1}, "input": {"file": "copybit.json"}, "seed": 3})
            .to_string(),
    )
    .unwrap();
    let cfg = cfg.display().to_string();
    let r = report(&run(&["--config", &cfg, "--no-timestamp"]));
    assert_eq!(r["result"]["key_size"], 2);
    assert_eq!(r["config"]["seed"], 3);
    let r = report(&run(&["pa", "--config", &cfg, "--b", "2", "--seed", "9", "--no-timestamp"]));
    assert_eq!(r["result"]["key_size"], 4);
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(run(&["dc", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(run(&["entropy", "--state", "/nonexistent/state.json"]).status.code(), Some(2));
    assert_eq!(run(&["pa", "--b", "5", "--state", &fixture("copybit.json")]).status.code(), Some(2));
    assert_eq!(run(&["entropy"]).status.code(), Some(2));
    assert_eq!(run(&["selftest", "--module", "nonexistent"]).status.code(), Some(2));
    let bad = Command::new(env!("CARGO_BIN_EXE_vna-entropy"))
        .args(["selftest", "--module", "hashing", "--quick"])
        .env("VNA_ENTROPY_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn csv_has_header_and_one_row() {
    let out = run(&["entropy", "--state", &fixture("maxent2.json"), "--format", "csv", "--no-timestamp"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let value = row[header.iter().position(|h| *h == "value").unwrap()].parse::<f64>().unwrap();
    assert!((value + 1.0).abs() < 1e-6);
    assert!(!header.contains(&"dual"));
}

#[test]
fn selftest_module_writes_report() {
    let path = scratch("selftest.json");
    let out = Command::new(env!("CARGO_BIN_EXE_vna-entropy"))
        .args(["selftest", "--module", "hashing", "--quick", "--seed", "42", "--out"])
        .arg(&path)
        .env("VNA_ENTROPY_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 failed"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert!(r["result"]["checks"].as_array().unwrap().iter().all(|c| c["module"] == "hashing"));
}
