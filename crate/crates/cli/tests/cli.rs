use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn cnod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnod"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = cnod(args);
    assert!(
        out.status.success(),
        "cnod {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_in(dir: &Path, cmd: &str, config: &str, extra: &[&str]) -> Output {
    let config = scenario(config);
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    run_ok(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Data rows of a CSV as string fields, comments and header dropped.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn homogeneous_bias_gives_positive_decision() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "simulate", "complete6_homogeneous.json", &[]);
    let summary = json(&dir.path().join("summary.json"));
    let b_e = floats(&summary["effective_bias"]);
    assert!((b_e[1] - 1.0 / 3f64.sqrt()).abs() < 1e-3);
    assert!(summary["decisions"].as_array().unwrap().iter().all(|d| d == "positive"));
    assert!(summary["max_drift"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn heterogeneous_constraint_flips_decision() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "simulate", "complete6_heterogeneous.json", &[]);
    let summary = json(&dir.path().join("summary.json"));
    let b_e = floats(&summary["effective_bias"]);
    assert!((b_e[1] + 1.0 / 11f64.sqrt()).abs() < 1e-3);
    assert!(summary["decisions"].as_array().unwrap().iter().all(|d| d == "negative"));
}

#[test]
fn subcritical_without_bias_stays_neutral() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "simulate", "complete6_subcritical.json", &[]);
    let summary = json(&dir.path().join("summary.json"));
    assert!(floats(&summary["final_y"]).iter().all(|y| y.abs() <= 1e-6));
    assert!(summary["decisions"].as_array().unwrap().iter().all(|d| d == "neutral"));
}

#[test]
fn outputs_are_deterministic_and_stamped() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        run_in(d.path(), "simulate", "complete6_homogeneous.json", &["--seed", "11", "--horizon", "5"]);
        run_in(d.path(), "sweep", "complete6_homogeneous.json", &["--u-steps", "4", "--horizon", "5", "--seed", "11"]);
    }
    for name in ["trajectory.csv", "sweep.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name}");
        let text = String::from_utf8(x).unwrap();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("# scenario_hash=") && first.ends_with("seed=11"), "{first}");
    }
    assert_eq!(rows(&a.path().join("sweep.csv")).len(), 4);
    let other = tempfile::tempdir().unwrap();
    run_in(other.path(), "simulate", "complete6_homogeneous.json", &["--seed", "12", "--horizon", "5"]);
    assert_ne!(
        fs::read(a.path().join("trajectory.csv")).unwrap(),
        fs::read(other.path().join("trajectory.csv")).unwrap()
    );
}

/// Newton-continuation rows grouped by u: (u, x_ls values).
fn newton_by_u(path: &Path) -> Vec<(f64, Vec<f64>)> {
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for r in rows(path).into_iter().filter(|r| r[0] == "newton_continuation") {
        let (u, x): (f64, f64) = (r[1].parse().unwrap(), r[4].parse().unwrap());
        match out.last_mut() {
            Some((last, xs)) if *last == u => xs.push(x),
            _ => out.push((u, vec![x])),
        }
    }
    out
}

#[test]
fn pitchfork_appears_at_critical_attention() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "bifurcate", "complete6_subcritical.json", &["--u-min", "0.06", "--u-max", "0.11", "--u-steps", "26"]);
    let u_star = json(&dir.path().join("reduction.json"))["u_star"].as_f64().unwrap();
    assert!((u_star - 0.3 / 3.5).abs() < 1e-12);
    let step = 0.05 / 25.0;
    for (u, xs) in newton_by_u(&dir.path().join("diagram.csv")) {
        if u < u_star - step {
            assert_eq!(xs.len(), 1, "u = {u}");
        } else if u > u_star + step {
            assert_eq!(xs.len(), 3, "u = {u}");
        }
    }
    let csv = fs::read_to_string(dir.path().join("diagram.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("unfolding_polynomial,")));
}

fn persistent_branch_sign(config: &str) -> f64 {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "bifurcate", config, &["--u-steps", "21"]);
    let rows = rows(&dir.path().join("diagram.csv"));
    let newton: Vec<_> = rows.iter().filter(|r| r[0] == "newton_continuation").collect();
    // The branch present at the smallest u continues through u*.
    let id = &newton[0][2];
    let xs: Vec<f64> = newton.iter().filter(|r| &r[2] == id).map(|r| r[4].parse().unwrap()).collect();
    assert_eq!(xs.len(), 21, "persistent branch is defined on the whole grid");
    assert!(xs.iter().all(|x| x.signum() == xs[0].signum() && x.abs() > 1e-6));
    xs[0].signum()
}

#[test]
fn persistent_branch_follows_effective_bias() {
    assert_eq!(persistent_branch_sign("complete6_homogeneous.json"), 1.0);
    assert_eq!(persistent_branch_sign("complete6_heterogeneous.json"), -1.0);
}

fn centrality_column(dir: &Path, col: usize) -> Vec<f64> {
    rows(&dir.join("centrality.csv")).iter().map(|r| r[col].parse().unwrap()).collect()
}

#[test]
fn ring_centrality_grows_with_distance() {
    for (config, n) in [("ring6_centrality.json", 6usize), ("ring7_centrality.json", 7)] {
        let dir = tempfile::tempdir().unwrap();
        run_in(dir.path(), "centrality", config, &[]);
        let report = json(&dir.path().join("centrality.json"));
        assert!((report["delta"].as_f64().unwrap() + 0.1).abs() < 1e-12);
        assert_eq!(report["ranking"].as_array().unwrap().last().unwrap(), 1);
        for col in [1, 2] {
            let c = centrality_column(dir.path(), col);
            let dist = |j: usize| j.min(n - j);
            assert!((1..n).all(|j| c[j] > c[0]));
            for j in 1..n {
                for k in 1..n {
                    if dist(j) < dist(k) {
                        assert!(c[j] <= c[k] + 1e-12, "{config} column {col}");
                    }
                }
            }
        }
    }
}

#[test]
fn star_hub_doubles_leaf_centrality() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "centrality", "star5.json", &[]);
    let exact = centrality_column(dir.path(), 1);
    for leaf in &exact[1..] {
        assert!((exact[0] / leaf - 2.0).abs() < 1e-10);
    }
    let report = json(&dir.path().join("centrality.json"));
    assert!((report["lambda_exact"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(report["ranking"][0], 1);
}

#[test]
fn verify_passes_on_valid_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "verify", "complete6_heterogeneous.json", &["--horizon", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{text}");
    assert!(text.contains("tol="));
    assert_eq!(text, fs::read_to_string(dir.path().join("verify.txt")).unwrap());
}

#[test]
fn verify_skips_reduced_checks_for_rank_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), "verify", "ring5_rank2.json", &[]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS invariance_drift"), "{text}");
    for name in ["full_reduced_equivalence", "jacobian_closed_form"] {
        assert!(text.contains(&format!("SKIP {name} skipped (rank>1)")), "{text}");
    }
}

#[test]
fn verify_names_the_broken_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenario("custom_asymmetric.json");
    let out = cnod(&["verify", "--config", config.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL adjacency") && text.contains("symmetric"), "{text}");
}

#[test]
fn rank_two_simulation_reports_full_state() {
    let dir = tempfile::tempdir().unwrap();
    run_in(dir.path(), "simulate", "ring5_rank2.json", &[]);
    let summary = json(&dir.path().join("summary.json"));
    assert!(summary["final_y"].is_null());
    assert_eq!(summary["final_z"].as_array().unwrap().len(), 5);
    assert!(summary["max_drift"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn exit_codes_distinguish_input_and_numeric_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"graph\": {\"kind\": \"ring\", \"n\": 4},\n  \"colour\": 3\n}\n").unwrap();
    let out = cnod(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let stiff = dir.path().join("stiff.json");
    fs::write(
        &stiff,
        r#"{"graph": {"kind": "ring", "n": 4}, "constraints": {"options": 2, "default": [1, 0]},
            "params": {"d": 30, "u": 0.1, "alpha": 1, "gamma": 0.5}}"#,
    )
    .unwrap();
    let out = cnod(&["simulate", "--config", stiff.to_str().unwrap(), "--dt", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));

    let out = cnod(&["centrality", "--config", stiff.to_str().unwrap(), "--dt", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn print_config_lists_defaults() {
    let config = scenario("ring6_centrality.json");
    let out = run_ok(&["--print-config", "--config", config.to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["integrator"]["dt"], 0.01);
    assert_eq!(v["initial"]["kind"], "seeded");
    assert_eq!(v["params"]["sigmoid"], "tanh");
    // The weakened edges push u* above the unconstrained ring value 0.15.
    let (lo, hi) = (v["sweep"]["u_min"].as_f64().unwrap(), v["sweep"]["u_max"].as_f64().unwrap());
    assert!(lo > 0.075 && (hi / lo - 3.0).abs() < 1e-12);
}
