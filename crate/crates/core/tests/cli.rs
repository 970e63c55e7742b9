use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ri-switch"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("RI_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const POLICY_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/policies");

#[test]
fn simulate_then_check_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), "cars = 2\nmax_ticks = 600\ncar_spawn_interval = 5.0\n[pedestrians]\ncap = 2\n").unwrap();
    let out = cli(&["simulate", "--scenario", "s.toml", "--trace", "t.jsonl", "--seed", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["seed"], 4);
    assert_eq!(result["mode"], "ri");
    assert_eq!(result["cars"].as_array().unwrap().len(), 2);

    let out = cli(&["check-trace", "t.jsonl", "--policies", POLICY_DIR], dir.path());
    assert!(out.status.success(), "{}{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("car 0") && text.contains("car 1"));
    assert!(!text.contains("FAIL"));

    // default policies give the same verdict
    assert!(cli(&["check-trace", "t.jsonl"], dir.path()).status.success());

    // a released output nobody produced is caught
    let trace = std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    let mut lines: Vec<String> = trace.lines().map(String::from).collect();
    let mut rec: serde_json::Value = serde_json::from_str(&lines[3]).unwrap();
    rec["released"] = serde_json::json!([0.9, 5.0]);
    lines[3] = rec.to_string();
    std::fs::write(dir.path().join("bad.jsonl"), lines.join("\n")).unwrap();
    let out = cli(&["check-trace", "bad.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL at tick"));
}

#[test]
fn seed_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.toml"), "max_ticks = 50\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ri-switch"))
        .args(["simulate", "--scenario", "s.toml", "--mode", "bare"])
        .current_dir(dir.path())
        .env("RI_SEED", "77")
        .output()
        .unwrap();
    assert!(out.status.success());
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!((result["seed"].as_u64(), result["mode"].as_str()), (Some(77), Some("bare")));
}

#[test]
fn run_tables_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("plan.toml"),
        "cars = [1]\npedestrians = [0, 1]\ntrials = 2\nthreads = 1\n[scenario]\nmax_ticks = 300\n",
    )
    .unwrap();
    let out = cli(&["run-tables", "--plan", "plan.toml", "--out", "res"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "table1.csv", "table2.csv"] {
        let text = std::fs::read_to_string(dir.path().join("res").join(f)).unwrap();
        assert_eq!(text.lines().count(), if f == "summary.csv" { 5 } else { 3 }, "{f}");
    }
    let bad = cli(&["run-tables", "--plan", "missing.toml"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn overhead_and_scaling_report() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("plan.toml"), "cars = [1]\npedestrians = [1]\n[scenario]\nmax_ticks = 200\n").unwrap();
    let out = cli(&["overhead", "--plan", "plan.toml", "--trials", "1", "--bank", "geometric"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("geometric bank") && stdout(&out).contains("overhead"));

    let out = cli(&["scaling", "--counts", "1,2", "--repeats", "1", "--ticks", "50"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("R²"));
    assert_eq!(cli(&["scaling", "--counts", "2,1"], dir.path()).status.code(), Some(2));
}

#[test]
fn dump_dot_and_lint() {
    let dir = tempfile::tempdir().unwrap();
    let normal = format!("{POLICY_DIR}/normal.vdta");
    let out = cli(&["dump-dot", &normal], dir.path());
    assert!(out.status.success());
    let dot = stdout(&out);
    assert!(dot.starts_with("digraph") && dot.contains("l_warn"));
    assert!(cli(&["dump-dot", &normal, "-o", "n.dot"], dir.path()).status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("n.dot")).unwrap(), dot);

    let out = cli(&["lint", &normal, &format!("{POLICY_DIR}/cautious.vdta")], dir.path());
    assert!(out.status.success(), "{}", stdout(&out));

    std::fs::write(
        dir.path().join("overlap.vdta"),
        "policy p { inputs { u: scalar } outputs { y: scalar } clocks { x }
           locations { a: initial accepting }
           transition a -> a when u < 2
           transition a -> a when u > 1 }",
    )
    .unwrap();
    let out = cli(&["lint", "overlap.vdta"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("overlap.vdta"));

    std::fs::write(dir.path().join("broken.vdta"), "policy p {").unwrap();
    let out = cli(&["dump-dot", "broken.vdta"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}
