use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: &str = "\
[dqn]
episodes = 3
[qlearning]
episodes = 3
[experiment]
seeds = [4]
";

fn railbeam(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railbeam"))
        .args(args)
        .arg("--out")
        .arg(dir.join("out"))
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn quick_config(dir: &Path) -> String {
    let path = dir.join("quick.toml");
    fs::write(&path, QUICK).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn unknown_agent_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = railbeam(dir.path(), &["train", "--agent", "sarsa"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[dqn]\nlearning_rate = \"fast\"\n").unwrap();
    let out = railbeam(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn missing_model_for_baseline_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = railbeam(dir.path(), &["eval", "--agent", "fba"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_then_eval_reproduces_the_greedy_rollout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = railbeam(dir.path(), &["train", "--config", &cfg, "--agent", "dqn"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in ["dqn_seed4.weights", "dqn_seed4_report.json", "dqn_seed4_policy.csv", "rsp_dqn_seed4.csv"] {
        assert!(o.join(f).is_file(), "{f} missing");
    }
    assert!(fs::read_to_string(o.join("dqn_seed4.weights")).unwrap().starts_with("RAILBEAM-QNET "));

    let out = railbeam(dir.path(), &["eval", "--config", &cfg, "--agent", "dqn"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // same greedy rollout, same provenance line, same file body
    assert_eq!(
        fs::read_to_string(o.join("dqn_seed4_eval.csv")).unwrap(),
        fs::read_to_string(o.join("rsp_dqn_seed4.csv")).unwrap()
    );
}

#[test]
fn eval_rejects_a_model_of_another_agent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    assert!(railbeam(dir.path(), &["train", "--config", &cfg, "--agent", "qlearning"]).status.success());
    let model = dir.path().join("out/qlearning_seed4.qtable");
    let out = railbeam(
        dir.path(),
        &["eval", "--config", &cfg, "--agent", "dqn", "--model", model.to_str().unwrap()],
    );
    assert_ne!(out.status.code(), Some(0));
}
