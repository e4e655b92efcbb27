use std::path::Path;
use std::process::{Command, Output};

use robust_linreg::dro::worst_case_distribution;
use robust_linreg::{load_dataset, PenaltySpec, RobustProblem};
use serde_json::Value;

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robust-linreg")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn fixture(dir: &Path) {
    std::fs::write(
        dir.join("d.csv"),
        "a,b,y\n1,2,3.1\n2,0.5,1.7\n-1,1,0.2\n0.3,0.7,2\n1.1,-0.4,0.35\n0.9,1.9,4.2\n",
    )
    .unwrap();
    std::fs::write(dir.join("e.csv"), "a,b,y\n1.2,2,3\n2,0.1,1.1\n-1.5,1,0.9\n0.3,0.2,2.5\n").unwrap();
    std::fs::write(dir.join("b1.csv"), "0.5\n0.2\n").unwrap();
    std::fs::write(dir.join("b2.csv"), "1.0,1.0\n").unwrap();
}

#[test]
fn no_arguments_prints_usage_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&[], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(bin(&["tune", "--method", "bcw", "--wat"], dir.path()).status.code(), Some(1));
    assert_eq!(bin(&["frobnicate"], dir.path()).status.code(), Some(1));
}

#[test]
fn fit_on_missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["fit", "--data", "nope/missing.csv", "--delta", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope/missing.csv"));
}

#[test]
fn tune_asymptotic_matches_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let v = json(&bin(
        &["tune", "--method", "asymptotic", "--r", "2", "--alpha", "0.05", "--n", "2500", "--diam", "33.82", "--c-rho-d", "1"],
        dir.path(),
    ));
    let q = v["constants"]["q"].as_f64().unwrap();
    let want = (q / 50.0).sqrt() * 33.82;
    assert!((v["delta"].as_f64().unwrap() - want).abs() < 1e-12);
    assert!((want - 5.575).abs() < 5e-3);
}

#[test]
fn fit_echoes_config_with_sorted_keys() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = bin(&["--seed", "9", "fit", "--data", "d.csv", "--delta", "0.2", "--penalty", "lp:2", "--r", "1.5"], dir.path());
    let v = json(&o);
    assert_eq!(v["config"]["global"]["seed"], 9);
    assert_eq!(v["config"]["problem"]["penalty"]["kind"], "lp");
    assert_eq!(v["beta_hat"].as_array().unwrap().len(), 2);
    let text = String::from_utf8(o.stdout).unwrap();
    let top: Vec<&str> = text.lines().filter(|l| l.starts_with("  \"")).map(|l| l.trim()).collect();
    let mut sorted = top.clone();
    sorted.sort();
    assert_eq!(top, sorted);
}

#[test]
fn worstcase_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let o = bin(&["worstcase", "d.csv", "--delta", "0.3", "--sigma", "2", "--penalty", "slope:2,1", "--beta-file", "b1.csv"], dir.path());
    let v = json(&o);
    let out = dir.path().join("d.worstcase.csv");
    assert_eq!(v["output"], "d.worstcase.csv");
    let reloaded = load_dataset(&out, "y").unwrap();
    let data = load_dataset(&dir.path().join("d.csv"), "y").unwrap();
    let prob = RobustProblem::new(2.0, 2.0, 0.3, PenaltySpec::Slope { lambda: vec![2.0, 1.0] }).unwrap();
    let ps = worst_case_distribution(&data, &prob, &[0.5, 0.2]).unwrap();
    assert_eq!(reloaded, ps.perturbed);
    for (a, b) in reloaded.x_flat().iter().zip(ps.perturbed.x_flat()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn msw_is_seeded_and_symmetric_in_value() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let a = json(&bin(&["--seed", "3", "msw", "d.csv", "e.csv", "--r", "1"], dir.path()));
    let b = json(&bin(&["--seed", "3", "msw", "d.csv", "e.csv", "--r", "1"], dir.path()));
    assert_eq!(a, b);
    assert!(a["value"].as_f64().unwrap() > 0.0);
    let rho = json(&bin(&["msw", "d.csv", "e.csv", "--rho", "l1", "--sigma", "1.5"], dir.path()));
    assert_eq!(rho["normalization"]["kind"], "rho_sigma");
}

#[test]
fn rank_reports_a_verdict_and_its_assumption() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path());
    let v = json(&bin(&["rank", "d.csv", "--beta1-file", "b1.csv", "--beta2-file", "b2.csv", "--delta", "0.1", "--diam", "10"], dir.path()));
    let t = v["verdict"]["t_n"].as_f64().unwrap();
    let c = v["verdict"]["critical_value"].as_f64().unwrap();
    assert_eq!(v["verdict"]["reject"].as_bool().unwrap(), t > c);
    assert!(v["assumption"].as_str().unwrap().contains("attained"));
    let o = bin(&["rank", "d.csv", "--beta1-file", "b1.csv", "--beta2-file", "b2.csv", "--delta", "0.1"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_format_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&["--format", "csv", "--out", "t.csv", "tune", "--method", "bcw", "--n", "100", "--d", "10", "--lambda-scale", "10"], dir.path());
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert!(text.starts_with("key,value\n"));
    assert!(text.lines().any(|l| l.starts_with("delta,")));
}

#[test]
fn simulate_writes_all_outputs_and_is_thread_invariant() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"n_grid": [150, 300], "reps": 4, "rules": ["new", "bcw", {"fixed": 0.05}]}"#,
    )
    .unwrap();
    let run = |threads: &str, out: &str| {
        let o = bin(&["--seed", "5", "--threads", threads, "--out", out, "simulate", "--experiment", "histogram", "--config", "cfg.json"], dir.path());
        json(&o);
        std::fs::read_to_string(dir.path().join(out).join("records.csv")).unwrap()
    };
    let one = run("1", "o1");
    let four = run("4", "o4");
    assert_eq!(one, four);
    assert_eq!(one.lines().count(), 1 + 4 * 2 * 3);
    for f in ["aggregates.json", "summary.svg"] {
        assert!(dir.path().join("o1").join(f).exists());
    }
    let agg: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("o1/aggregates.json")).unwrap()).unwrap();
    assert_eq!(agg["config"]["resolved"]["reps"], 4);
    assert_eq!(agg["config"]["global"]["seed"], 5);
}

#[test]
fn simulate_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), r#"{"repetitions": 4}"#).unwrap();
    let o = bin(&["--out", "o", "simulate", "--experiment", "bound", "--config", "cfg.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
