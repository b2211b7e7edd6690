use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mallows(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mallows"))
        .args(args)
        .env_remove("MALLOWS_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let out = mallows(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(&stdout(&out)).unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn pmf_csv_sums_to_one() {
    let out = mallows(&["pmf", "--N", "6", "--q", "0.5", "--L", "3", "--K", "4", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(header, ["s", "prob", "log_prob"]);
    let total: f64 = rows.iter().map(|r| r[1].parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12, "{total}");
    for r in &rows {
        let p: f64 = r[1].parse().unwrap();
        let lp: f64 = r[2].parse().unwrap();
        assert!((p.ln() - lp).abs() < 1e-12);
    }
    let support: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(support, [1, 2, 3]);
}

#[test]
fn pmf_json_schema() {
    let v = json(&["pmf", "--N", "6", "--beta", "1", "--L", "3", "--K", "4"]);
    let r = &v["result"];
    assert_eq!(r["N"], 6);
    assert_eq!(r["L"], 3);
    assert_eq!(r["K"], 4);
    assert_eq!(r["beta"], 1.0);
    assert_eq!(r["q"].as_f64().unwrap(), 1.0 - 1.0 / 6.0);
    let probs: Vec<f64> = r["log_probs"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap().exp()).collect();
    assert_eq!(probs.len(), r["s_max"].as_u64().unwrap() as usize - r["s_min"].as_u64().unwrap() as usize + 1);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn joint_pmf_marginal_matches_single() {
    let v = json(&["pmf", "--N", "6", "--q", "0.3", "--L-list", "2,5", "--K", "3"]);
    let rows = v["result"]["rows"].as_array().unwrap();
    let mut marginal = [0.0f64; 7];
    for row in rows {
        let s = row["s"].as_array().unwrap();
        assert!(s[0].as_u64() <= s[1].as_u64());
        marginal[s[1].as_u64().unwrap() as usize] += row["prob"].as_f64().unwrap();
    }
    let single = json(&["pmf", "--N", "6", "--q", "0.3", "--L", "5", "--K", "3"]);
    let r = &single["result"];
    let s_min = r["s_min"].as_u64().unwrap() as usize;
    for (i, lp) in r["log_probs"].as_array().unwrap().iter().enumerate() {
        assert!((marginal[s_min + i] - lp.as_f64().unwrap().exp()).abs() < 1e-12);
    }
}

#[test]
fn sample_is_deterministic_in_seed() {
    let args = ["sample", "--N", "10", "--beta", "1", "--count", "3", "--seed", "7"];
    let a = mallows(&args);
    let b = mallows(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = mallows(&["sample", "--N", "10", "--beta", "1", "--count", "3", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);

    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    let perms = v["result"]["permutations"].as_array().unwrap();
    assert_eq!(perms.len(), 3);
    for p in perms {
        let mut w: Vec<u64> = p.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        w.sort_unstable();
        assert_eq!(w, (1..=10).collect::<Vec<_>>());
    }
}

#[test]
fn sample_independent_of_thread_count() {
    let base = ["sample", "--N", "30", "--beta", "2", "--count", "50", "--seed", "3"];
    let one = mallows(&[&base[..], &["--threads", "1"]].concat());
    let four = mallows(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn law_reports_limit_shape() {
    let v = json(&["law", "--beta", "1", "--x", "0.5", "--y", "0.5"]);
    let h = v["result"]["values"][0]["h"].as_f64().unwrap();
    assert!((h - 0.280926).abs() < 1e-5, "{h}");
    assert!((h - 0.28092980362).abs() < 1e-10, "{h}");
    assert!(v["result"].get("covariance").is_none());
}

#[test]
fn law_with_y_list_includes_covariance() {
    let v = json(&["law", "--beta", "1", "--x", "0.5", "--y-list", "0.3,0.7", "--N", "500"]);
    let c = &v["result"]["covariance"]["c"];
    assert_eq!(c[0][1], c[1][0]);
    for i in 0..2 {
        let sigma_n = v["result"]["values"][i]["sigma_n"].as_f64().unwrap();
        let sigma = v["result"]["values"][i]["sigma"].as_f64().unwrap();
        assert!((sigma_n - 500f64.sqrt() / sigma).abs() < 1e-12);
        assert!((c[i][i].as_f64().unwrap() - 1.0 / (sigma * sigma)).abs() < 1e-12);
    }
}

#[test]
fn json_round_trips_config() {
    let v = json(&["pmf", "--N", "7", "--q", "0.1", "--L", "2", "--K", "5"]);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "pmf");
    assert_eq!(v["config"]["N"], 7);
    assert_eq!(v["config"]["q"].as_f64(), Some(0.1));
    assert_eq!(v["config"]["L"], 2);
    assert_eq!(v["config"]["K"], 5);

    let reparsed: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(reparsed, v);
}

#[test]
fn replaying_config_reproduces_result() {
    let v = json(&["law", "--beta", "2.5", "--x", "0.3", "--y", "0.6", "--delta", "0.2", "--gamma", "0.1"]);
    let cfg = &v["config"];
    let mut argv = vec![v["command"].as_str().unwrap().to_string()];
    for (key, val) in cfg.as_object().unwrap() {
        argv.push(format!("--{key}"));
        argv.push(val.to_string());
    }
    let argv: Vec<&str> = argv.iter().map(String::as_str).collect();
    assert_eq!(json(&argv), v);
}

#[test]
fn full_precision_in_csv() {
    let out = mallows(&["law", "--beta", "1", "--x", "0.5", "--y", "0.5", "--format", "csv"]);
    let (header, rows) = csv_rows(&stdout(&out));
    let h_col = header.iter().position(|c| c == "h").unwrap();
    let from_csv: f64 = rows[0][h_col].parse().unwrap();
    let v = json(&["law", "--beta", "1", "--x", "0.5", "--y", "0.5"]);
    assert_eq!(from_csv, v["result"]["values"][0]["h"].as_f64().unwrap());
}

#[test]
fn output_file_respects_env_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mallows"))
        .args(["pmf", "--N", "5", "--q", "0.5", "--L", "2", "--K", "2", "--format", "csv", "--output", "sub/t.csv"])
        .env("MALLOWS_OUTPUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("sub/t.csv")).unwrap();
    assert!(text.starts_with("s,prob,log_prob"));

    let abs = dir.path().join("abs.json");
    let out = mallows(&["law", "--beta", "1", "--x", "0.5", "--y", "0.5", "--output", abs.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(Path::new(&abs).exists());
}

#[test]
fn usage_errors_exit_one() {
    let cases: [&[&str]; 7] = [
        &["pmf", "--N", "5", "--q", "0.5", "--beta", "1", "--L", "2", "--K", "2"],
        &["pmf", "--N", "5", "--L", "2", "--K", "2"],
        &["pmf", "--N", "5", "--q", "0.5", "--L", "2", "--K", "2", "--bogus"],
        &["pmf", "--N", "5", "--q", "1.5", "--L", "2", "--K", "2"],
        &["pmf", "--N", "5", "--q", "0.5", "--L", "9", "--K", "2"],
        &["law", "--beta", "1", "--x", "1.2", "--y", "0.5"],
        &["sample", "--N", "4", "--beta", "8"],
    ];
    for args in cases {
        let out = mallows(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn domain_errors_name_the_precondition() {
    let out = mallows(&["pmf", "--N", "5", "--q", "1.5", "--L", "2", "--K", "2"]);
    let msg = String::from_utf8(out.stderr).unwrap();
    assert!(msg.contains("q must lie in [0, 1)"), "{msg}");
}

#[test]
fn help_lists_subcommands() {
    let out = mallows(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for cmd in ["sample", "pmf", "law", "verify-lclt", "verify-ldp", "verify-clt", "verify-cov", "verify-sampler"] {
        assert!(text.contains(cmd), "{cmd}");
    }
}

#[test]
fn passing_checks_exit_zero() {
    let v = json(&["verify-ldp", "--delta", "0.4"]);
    assert_eq!(v["result"]["passed"], true);
    let v = json(&["verify-sampler", "--N", "4", "--q", "0.5", "--n-samples", "200000", "--seed", "1"]);
    assert_eq!(v["result"]["passed"], true);
    let v = json(&["verify-lclt"]);
    assert_eq!(v["result"]["passed"], true);
}

#[test]
fn failing_check_exits_two() {
    // Too few samples for a KS distance under the tolerance.
    let out = mallows(&["verify-clt", "--N-list", "100", "--n-samples", "20", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["passed"], false);
}

#[test]
fn verify_cov_csv_is_long_format() {
    let out = mallows(&[
        "verify-cov", "--y-list", "0.3,0.7", "--N-list", "100", "--n-samples", "20000", "--seed", "5", "--format", "csv",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)));
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(header, ["N", "i", "j", "limit", "empirical", "standard_error", "deviation_se"]);
    assert_eq!(rows.len(), 4);
}

#[test]
fn verify_lclt_plot_rows() {
    let out = mallows(&["verify-lclt", "--N-list", "100,400", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(header, ["N", "k", "exact", "predicted", "rel_error"]);
    assert!(rows.iter().any(|r| r[0] == "100") && rows.iter().any(|r| r[0] == "400"));
}
