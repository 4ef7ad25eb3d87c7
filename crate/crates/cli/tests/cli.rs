use std::path::Path;
use std::process::{Command, Output};

fn admitlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_admitlab")).args(args).env_remove("ADMITLAB_THREADS").output().unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&stdout(&admitlab(args))).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect()
}

fn entries(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().count()
}

#[test]
fn exit_codes() {
    assert_eq!(admitlab(&["--help"]).status.code(), Some(0));
    assert_eq!(admitlab(&["poisson", "bounds", "--d", "4"]).status.code(), Some(0));
    assert_eq!(admitlab(&["poisson", "frobnicate"]).status.code(), Some(2));
    assert_eq!(admitlab(&["poisson", "bounds", "--d", "zero"]).status.code(), Some(2));
    assert_eq!(admitlab(&["poisson", "bounds", "--d", "1"]).status.code(), Some(2));
    assert_eq!(admitlab(&["sobolev", "c-bound", "--s", "1.5", "--alpha", "1", "--B", "1"]).status.code(), Some(2));
    assert_eq!(admitlab(&["pp", "discretize", "--input", "/nonexistent/log.txt", "--d", "4"]).status.code(), Some(1));
}

#[test]
fn invalid_thread_count_is_a_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_admitlab"))
        .args(["poisson", "bounds", "--d", "4"])
        .env("ADMITLAB_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ADMITLAB_THREADS"));
}

#[test]
fn validation_happens_before_any_file_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("curve.csv");
    let out = admitlab(&["sobolev", "c-curve", "--vary", "alpha", "--B", "1", "--grid", "1:0.5:0.1", "--out-path", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(entries(dir.path()), 0);
    let out = admitlab(&["l2", "risk", "--d", "10", "--grid", "0:20:5", "--out-path", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "grid beyond the ball radius");
    assert_eq!(entries(dir.path()), 0);
}

#[test]
fn single_point_curve_has_header_and_one_row() {
    let text = stdout(&admitlab(&["sobolev", "c-curve", "--vary", "B", "--alpha", "1", "--grid", "0.1:0.1:0.1"]));
    assert_eq!(text.lines().count(), 2);
    assert_eq!(text.lines().next(), Some("alpha,B,s_star,c_value,integral_I"));
}

#[test]
fn csv_round_trips_to_full_precision() {
    let text = stdout(&admitlab(&["poisson", "gap", "--d", "8", "--grid", "0:8:0.5"]));
    for row in csv_rows(&text) {
        let direct = admitlab::poisson::risk_diff_j_minus_js(row[0], 8, 1e-12).unwrap();
        assert!((row[1] - direct).abs() <= 1e-15 * direct.abs().max(1e-300), "{} vs {direct}", row[1]);
    }
}

#[test]
fn poisson_bounds_report() {
    let v = json(&["poisson", "bounds", "--d", "4"]);
    assert_eq!(v["d"], 4);
    assert_eq!(v["upper_delta0"], 2.0);
    assert!((v["js_upper_delta0"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let lower = v["lower_exact"].as_f64().unwrap();
    assert!(v["lower_closed_form"].as_f64().unwrap() <= lower && lower <= 2.0);
}

#[test]
fn claim_check_report() {
    let v = json(&["poisson", "claim-c2", "--d", "10", "--eps", "0.5"]);
    assert_eq!(v["holds"], v["lhs"].as_f64().unwrap() >= v["rhs"].as_f64().unwrap());
}

#[test]
fn c_bound_with_sample_size() {
    let v = json(&["sobolev", "c-bound", "--s", "0.9", "--alpha", "1", "--B", "1", "--n", "10000"]);
    assert!(v["c_value"].as_f64().unwrap() > 0.0);
    assert!(v["inf_gap"].as_f64().unwrap() > 0.0);
    assert!(v.get("finite_n_correction").is_some());
}

#[test]
fn b_curve_is_convex() {
    let rows = csv_rows(&stdout(&admitlab(&["sobolev", "c-curve", "--vary", "B", "--alpha", "1", "--grid", "0.1:5:0.1"])));
    assert_eq!(rows.len(), 50);
    for w in rows.windows(3) {
        assert!(w[2][3] - 2.0 * w[1][3] + w[0][3] >= -1e-12);
    }
}

#[test]
fn curve_svg_is_written_alongside() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("fig.svg");
    let out = admitlab(&["sobolev", "c-curve", "--vary", "alpha", "--B", "1", "--grid", "0.25:5:0.25", "--svg", svg.to_str().unwrap()]);
    stdout(&out);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn json_output_for_curves() {
    let v = json(&["sobolev", "gap", "--alpha", "1", "--s", "0.5", "--n", "1000", "--grid", "1:3:1", "--out", "json"]);
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn empty_intensity_gives_empty_log() {
    let text = stdout(&admitlab(&["pp", "simulate", "--lambda", "const:0", "--seed", "1"]));
    assert_eq!(text.trim_end(), "# unit-interval event log v1");
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("events.txt");
    let p = log.to_str().unwrap();
    stdout(&admitlab(&["pp", "simulate", "--lambda", "const:400", "--seed", "7", "--out-path", p]));
    let counts = csv_rows(&stdout(&admitlab(&["pp", "discretize", "--input", p, "--d", "8"])));
    let total: f64 = counts.iter().map(|r| r[2]).sum();
    let events = std::fs::read_to_string(&log).unwrap().lines().count() - 1;
    assert_eq!(total as usize, events);
    let est = csv_rows(&stdout(&admitlab(&["pp", "estimate", "--input", p, "--d", "8"])));
    assert_eq!(est.len(), 8);
    let mass: f64 = est.iter().map(|r| r[2] * (r[1] - r[0])).sum();
    assert!((mass - 400.0).abs() < 80.0, "{mass}");
}

#[test]
fn malformed_event_log_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("bad.txt");
    std::fs::write(&log, "0.1\n0.2\n").unwrap();
    assert_eq!(admitlab(&["pp", "discretize", "--input", log.to_str().unwrap(), "--d", "4"]).status.code(), Some(2));
}

#[test]
fn sandwich_rows_nest() {
    let text = stdout(&admitlab(&["bounds", "sandwich", "--model", "poisson", "--d", "6"]));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")), "{text}");
}
