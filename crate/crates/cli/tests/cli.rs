use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pasql_core::model::envs::fig4;
use pasql_core::model::io::save_model;

fn pasql(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pasql"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("PASQL_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value after `J = ` on stdout.
fn reported_j(o: &Output) -> f64 {
    let s = stdout(o);
    let tail = s
        .split("J = ")
        .nth(1)
        .unwrap_or_else(|| panic!("no J in output: {s}"));
    tail.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn limit_then_eval_of_greedy_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = pasql(
        dir.path(),
        &[
            "limit",
            "--env",
            "fig4",
            "--p",
            "0.01",
            "--behavior",
            "mu1",
            "--L",
            "2",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let policy = dir.path().join("limit_policy.json");
    let o = pasql(
        dir.path(),
        &[
            "eval",
            "--env",
            "fig4",
            "--policy",
            policy.to_str().unwrap(),
        ],
    );
    assert!(o.status.success());
    assert!((reported_j(&o) - 6.793).abs() < 1e-3);
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    assert!(csv.starts_with("policy,J\n1001,6.79"));
    let zeta = fs::read_to_string(dir.path().join("limit_zeta.csv")).unwrap();
    assert_eq!(zeta.lines().next(), Some("phase,s,y,z,a,prob"));
}

#[test]
fn search_on_counting_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = pasql(dir.path(), &["search", "--env", "example1", "--L", "5"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("search_L5.csv")).unwrap();
    let j: f64 = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((j - 8.810).abs() < 1e-3);
}

#[test]
fn zero_reward_model_file_evaluates_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = fig4::<f64>(0.01).unwrap();
    m.reward.iter_mut().for_each(|r| *r = 0.0);
    let path = dir.path().join("zero.json");
    save_model(&m, &path).unwrap();
    let o = pasql(
        dir.path(),
        &["eval", "--model", path.to_str().unwrap(), "--actions", "00"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(reported_j(&o), 0.0);
}

#[test]
fn usage_errors_exit_2_and_computation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = pasql(
        dir.path(),
        &["limit", "--env", "example1", "--behavior", "mu1"],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = pasql(
        dir.path(),
        &[
            "eval",
            "--model",
            "/nonexistent/model.json",
            "--actions",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let o = pasql(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    // Negative rewards are outside the bound's scope.
    let o = pasql(
        dir.path(),
        &[
            "bound",
            "--env",
            "example2",
            "--behavior",
            "uniform",
            "--depth",
            "3",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repro_writes_tables_and_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = pasql(dir.path(), &["repro", "appendixB_zeta", "table3"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
    let csv = fs::read_to_string(dir.path().join("repro_appendixB_zeta.csv")).unwrap();
    assert!(csv.contains("0,0,4/9,0.444444444444"));
    let o = pasql(dir.path(), &["repro", "table9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn convergence_single_seed_is_byte_stable() {
    let run = |dir: &Path| {
        let o = pasql(
            dir,
            &[
                "--seed-list",
                "3",
                "convergence",
                "--env",
                "fig4",
                "--behavior",
                "mu2",
                "--steps",
                "4000",
                "--log-every",
                "4000",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let c = dir.join("convergence");
        (
            fs::read_to_string(c.join("seed3.csv")).unwrap(),
            fs::read_to_string(c.join("summary.csv")).unwrap(),
        )
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (trace_a, summary_a) = run(a.path());
    let (trace_b, summary_b) = run(b.path());
    assert_eq!(trace_a, trace_b);
    assert_eq!(summary_a, summary_b);
    // Header plus one row per (phase, z, a).
    assert_eq!(summary_a.lines().count(), 1 + 8);
    let limit = fs::read_to_string(a.path().join("convergence/limit.csv")).unwrap();
    let q: Vec<f64> = limit
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    for i in 0..4 {
        assert!((q[i] - q[i + 4]).abs() < 1e-9);
    }
}

#[test]
fn config_file_and_output_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{
  "env": {"name": "fig4", "p": 0.01},
  "behavior": "mu3",
  "steps": 2000,
  "schedule": {"kind": "exponential", "start": 0.001, "end": 0.00001, "horizon": 2000},
  "seeds": [1, 2]
}"#,
    )
    .unwrap();
    let out = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_pasql"))
        .args(["learn", "--config", cfg.to_str().unwrap()])
        .env("PASQL_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("learn_seed1.csv").exists() && out.join("learn_seed2.json").exists());

    fs::write(&cfg, r#"{"env": {"name": "fig4"}, "behavior": "mu3", "steps": 10, "schedule": {"kind": "bogus"}}"#).unwrap();
    let o = pasql(dir.path(), &["learn", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
