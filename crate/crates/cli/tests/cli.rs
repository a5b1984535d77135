use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn mfdp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfdp")).args(args).output().expect("binary runs")
}

fn json_result(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    assert_eq!(v["tool"], "mfdp");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
    v
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

fn stats_csv(dir: &TempDir, stats: &[f64]) -> String {
    let mut s = String::from("statistic\n");
    for t in stats {
        s.push_str(&format!("{t}\n"));
    }
    write(dir, "stats.csv", &s)
}

#[test]
fn estimate_worked_example() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[3.0, -2.5, 0.5, 4.0]);
    let out = mfdp(&["estimate", "--shape", "directional", "--delta", "0", "--t", "1", &input]);
    let v = json_result(&out);
    let r = &v["result"];
    assert_eq!(r["r"], 2);
    assert_eq!(r["v_tilde"], 1);
    assert_eq!(r["fdp_hat"], 0.5);
    assert_eq!(r["rejected"], serde_json::json!([1, 4]));
    assert!(v["seed"].is_null());
}

#[test]
fn estimate_default_threshold_is_zero() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[3.0, -2.5, 0.5, 4.0]);
    let v = json_result(&mfdp(&["estimate", "--shape", "directional", "--delta", "0", &input]));
    assert_eq!(v["result"]["t"], 0.0);
    assert_eq!(v["result"]["r"], 3);
}

#[test]
fn missing_margin_column_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[1.0, 2.0]);
    let out = mfdp(&["estimate", "--shape", "directional", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("'margin'"));
}

#[test]
fn malformed_row_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "bad.csv", "statistic,margin\n1.0,0\nabc,0\n");
    let out = mfdp(&["estimate", "--shape", "directional", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn control_toy_example() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[5.0, 4.0, 3.0, -3.5]);
    let v = json_result(&mfdp(&["control", "--shape", "directional", "--delta", "0", "--gamma", "0.4", &input]));
    assert_eq!(v["result"]["s_plus"], 3.5);
    assert_eq!(v["result"]["rejected"], serde_json::json!([1, 2]));
}

#[test]
fn gamma_zero_rejects_all_positive_statistics() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[0.3, 1.0, 2.5, 7.0]);
    let v = json_result(&mfdp(&["control", "--shape", "directional", "--delta", "0", "--gamma", "0", &input]));
    assert_eq!(v["result"]["r"], 4);
    assert_eq!(v["result"]["fdp_hat"], 0.0);
}

#[test]
fn gamma_outside_range_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[1.0]);
    let out = mfdp(&["control", "--shape", "directional", "--delta", "0", "--gamma", "1", &input]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pvalue_at_the_margin_is_one_half() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "s.csv", "statistic,margin\n1.5,1.5\n");
    let v = json_result(&mfdp(&["pvalues", "--shape", "directional", "--null", "std-normal", &input]));
    assert_eq!(v["result"]["pvalues"][0], 0.5);
}

#[test]
fn pvalues_csv_with_baselines() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[4.0, 3.5, 0.1, -1.0]);
    let out = mfdp(&["--csv", "pvalues", "--shape", "directional", "--delta", "0", "--bh", "0.1", "--lr", "0.1", &input]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# mfdp"));
    assert_eq!(lines.next().unwrap(), "index,statistic,margin,pvalue,bh,lr");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].ends_with(",1,1"));
    assert!(rows[3].ends_with(",0,0"));
}

#[test]
fn written_statistics_round_trip() {
    let dir = TempDir::new().unwrap();
    // Two groups of three rows, three columns.
    let data = write(
        &dir,
        "data.csv",
        "group,a,b,c\nx,1.2,0.3,-0.7\ny,0.1,0.2,0.4\nx,2.2,-0.1,0.3\ny,-0.4,0.5,0.1\nx,1.7,0.9,-1.1\ny,0.3,-0.2,0.6\n",
    );
    let saved = dir.path().join("saved.csv");
    let saved = saved.to_str().unwrap();
    let first = json_result(&mfdp(&[
        "estimate", "--shape", "directional", "--delta", "0.5", "--data", &data, "--statistic", "two-group",
        "--write-statistics", saved,
    ]));
    let again = json_result(&mfdp(&["estimate", "--shape", "directional", saved]));
    for key in ["r", "r_minus", "v_tilde", "fdp_hat", "rejected"] {
        assert_eq!(first["result"][key], again["result"][key], "{key}");
    }
}

#[test]
fn welch_reports_source_columns() {
    let dir = TempDir::new().unwrap();
    // Column b is constant in both groups and has no statistic.
    let data = write(
        &dir,
        "data.csv",
        "group,a,b,c\nx,1.0,5,0.2\nx,1.4,5,0.5\nx,0.8,5,0.1\ny,-1.0,5,0.4\ny,-1.3,5,0.3\ny,-0.9,5,0.6\n",
    );
    let v = json_result(&mfdp(&[
        "estimate", "--shape", "equivalence", "--delta", "2", "--data", &data, "--statistic", "welch",
    ]));
    assert_eq!(v["result"]["m"], 2);
    assert_eq!(v["result"]["excluded_columns"], serde_json::json!([2]));
}

#[test]
fn per_hypothesis_margins_file() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[3.0, 3.0, -1.0]);
    let margins = write(&dir, "margins.csv", "margin\n0\n4\n0\n");
    let v = json_result(&mfdp(&["estimate", "--shape", "directional", "--margins", &margins, &input]));
    assert_eq!(v["result"]["rejected"], serde_json::json!([1]));
    assert_eq!(v["result"]["r_minus"], 2);
}

#[test]
fn randomized_estimate_is_replayable_and_prints_drawn_seed() {
    let dir = TempDir::new().unwrap();
    let input = stats_csv(&dir, &[1.0, -1.0]);
    let args = ["estimate", "--shape", "directional", "--delta", "0", "--method", "randomized", input.as_str()];
    let unseeded = mfdp(&args);
    let v = json_result(&unseeded);
    let seed = v["seed"].as_u64().expect("a seed is drawn");
    assert!(String::from_utf8_lossy(&unseeded.stderr).contains(&format!("--seed {seed}")));

    let seed_arg = seed.to_string();
    let mut replay = vec!["--seed", seed_arg.as_str()];
    replay.extend(args);
    let w = json_result(&mfdp(&replay));
    assert_eq!(v["result"], w["result"]);
    assert_eq!(v["config_sha256"], w["config_sha256"]);
}

#[test]
fn simulate_writes_metric_table() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "study.json",
        r#"{"n": 10, "m": 40, "shape": "directional", "pi0": [0.5], "d": [1.0],
            "methods": ["novel", "bh", "lr"], "gammas": [0.1], "replicates": 50}"#,
    );
    let table = dir.path().join("table.csv");
    let out = mfdp(&["--seed", "5", "--threads", "2", "simulate", "--spec", &spec, "--table", table.to_str().unwrap()]);
    let v = json_result(&out);
    assert_eq!(v["seed"], 5);
    let csv = std::fs::read_to_string(&table).unwrap();
    assert!(csv.starts_with("cell_id,pi0,rho,d,method,metric,value,se"));
    assert!(csv.contains("power[gamma=0.1]"));

    let seq = mfdp(&["--seed", "5", "--csv", "simulate", "--spec", &spec, "--sequential"]);
    let seq = String::from_utf8(seq.stdout).unwrap();
    assert_eq!(seq.lines().skip(1).collect::<Vec<_>>().join("\n"), csv.trim_end());
}

#[test]
fn simulate_infeasible_combination_exits_3() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "study.json",
        r#"{"n": 6, "m": 30, "shape": "directional", "pi0": [0.5], "methods": ["sam-ct"], "replicates": 2, "seed": 1}"#,
    );
    assert_eq!(mfdp(&["simulate", "--spec", &spec]).status.code(), Some(3));
}

#[test]
fn simulate_unknown_field_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let spec = write(&dir, "study.json", r#"{"n": 6, "m": 3, "shape": "directional", "pi0": [1], "methods": ["novel"], "replicates": 2, "typo": 1}"#);
    assert_eq!(mfdp(&["simulate", "--spec", &spec]).status.code(), Some(2));
}

#[test]
fn verify_ct_reports_zero_mismatches() {
    let v = json_result(&mfdp(&["--seed", "11", "verify-ct", "--m", "6", "--instances", "60"]));
    assert_eq!(v["result"]["mismatches"], 0);
    assert_eq!(v["result"]["reports"].as_array().unwrap().len(), 5);
}

#[test]
fn verify_ct_too_large_exits_3() {
    let out = mfdp(&["--seed", "1", "verify-ct", "--m", "20", "--instances", "1", "--family", "directional-basic"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn exact_tests() {
    let dir = TempDir::new().unwrap();
    let one = write(&dir, "one.csv", "x\n1.1\n0.8\n1.5\n0.9\n1.3\n0.7\n1.2\n1.0\n");
    let v = json_result(&mfdp(&["exact-test", &one, "--kind", "sign-flip", "--alpha", "0.125"]));
    assert_eq!(v["result"]["reject"], true);
    assert_eq!(v["result"]["transformations"], 256);

    let two = write(&dir, "two.csv", "group,y\na,3\na,4\na,5\nb,0\nb,1\nb,2\n");
    let v = json_result(&mfdp(&["exact-test", &two, "--kind", "permutation", "--alpha", "0.05", "--column", "y"]));
    assert_eq!(v["result"]["transformations"], 20);
    assert_eq!(v["result"]["reject"], true);

    let out = mfdp(&["exact-test", &one, "--kind", "permutation"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonexistent_input_exits_2() {
    let missing = Path::new("/nonexistent/stats.csv");
    let out = mfdp(&["estimate", "--shape", "directional", "--delta", "0", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
