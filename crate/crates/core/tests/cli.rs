mod common;

use std::process::Command;

use chopthin::cli::{run, EXIT_INVALID, EXIT_OK};
use common::lower_bound;

fn call(args: &[&str], stdin: &str) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("chopthin").chain(args.iter().copied());
    let code = run(argv, stdin.as_bytes(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn resample_identity() {
    let (code, out, _) = call(
        &["resample", "--scheme", "chopthin", "--eta", "4", "--n-out", "5", "--seed", "1"],
        "1\n1\n1\n1\n1\n",
    );
    assert_eq!(code, EXIT_OK);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines[0], "ancestor,weight");
    let expect: Vec<String> = (1..=5).map(|i| format!("{i},1")).collect();
    assert_eq!(&lines[1..], expect.as_slice());
}

#[test]
fn resample_degenerate_multinomial() {
    let (code, out, _) = call(
        &["resample", "--scheme", "multinomial", "--n-out", "3", "--seed", "7"],
        "1\n0\n",
    );
    assert_eq!(code, EXIT_OK);
    let lines: Vec<_> = out.lines().skip(1).collect();
    assert_eq!(lines.len(), 3);
    assert!(lines.iter().all(|l| l.starts_with("1,")));
}

#[test]
fn resample_reports_bad_line() {
    let (code, _, err) = call(&["resample"], "1\n2\nx\n");
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("line 3"), "{err}");
    let (code, _, _) = call(&["resample", "--eta", "2"], "1\n2\n");
    assert_eq!(code, EXIT_INVALID);
    let (code, _, _) = call(&["resample", "--scheme", "systematic", "--eta", "5"], "1\n2\n");
    assert_eq!(code, EXIT_INVALID);
    let (code, _, _) = call(&["resample"], "0\n0\n");
    assert_eq!(code, EXIT_INVALID);
    let (code, _, _) = call(&["resample", "--bogus"], "");
    assert_eq!(code, EXIT_INVALID);
}

#[test]
fn resample_is_seed_deterministic() {
    let input = "0.3\n1e-2\n4\n2.5\n\n0.7,1.1\n";
    let a = call(&["resample", "--n-out", "9", "--seed", "5"], input);
    let b = call(&["resample", "--n-out", "9", "--seed", "5"], input);
    let c = call(&["resample", "--n-out", "9", "--seed", "6"], input);
    assert_eq!(a, b);
    assert_eq!(a.1.lines().count(), 10);
    assert_ne!(a.1, c.1);
}

#[test]
fn ess_trace_stays_above_floor() {
    let (code, out, _) = call(
        &[
            "ess-trace", "--scheme", "chopthin", "--beta-fraction", "1", "--eta", "5.8284",
            "--n", "1000", "--steps", "50", "--seed", "3",
        ],
        "",
    );
    assert_eq!(code, EXIT_OK);
    let rows: Vec<_> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 50);
    let floor = lower_bound(5.8284, 1000);
    for r in rows {
        let ess_after: f64 = r.split(',').nth(5).unwrap().parse().unwrap();
        assert!(ess_after >= floor - 1e-9, "{r}");
        assert!(ess_after >= 498.9, "{r}");
    }
}

#[test]
fn pf_run_outputs_one_row_per_step() {
    let args = ["pf-run", "--model", "sv", "--n", "200", "--steps", "25", "--seed", "2"];
    let (code, out, _) = call(&args, "");
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 26);
    assert!(out.starts_with("t,observation,posterior_mean,log_cond_lik,"));
    assert_eq!(call(&args, "").1, out);
}

#[test]
fn pf_run_reads_observations() {
    let dir = std::env::temp_dir().join(format!("chopthin-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("y.txt");
    std::fs::write(&path, "observation\n1\n0.5\n-0.25\n").unwrap();
    let (code, out, _) = call(
        &["pf-run", "--observations", path.to_str().unwrap(), "--n", "100", "--seed", "1"],
        "",
    );
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(out.lines().count(), 4);
    std::fs::write(&path, "1\nnope\n").unwrap();
    let (code, _, err) = call(&["pf-run", "--observations", path.to_str().unwrap()], "");
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("line 2"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn mse_study_csv_and_json() {
    let base = [
        "mse-study", "--sigma-y", "1", "--n", "50", "--steps", "10", "--iterations", "4",
        "--filter", "chopthin", "--filter", "systematic", "--workers", "2", "--seed", "9",
    ];
    let (code, csv, err) = call(&base, "");
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(csv.starts_with(chopthin::experiments::CSV_HEADER));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(err.contains("master_seed=9"));
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json"]);
    let (code, json, _) = call(&json_args, "");
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["master_seed"], 9);
    assert!(v["seed_mixer"].is_string());
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    // thread count does not change results
    let mut one = base.to_vec();
    one[base.len() - 3] = "1";
    assert_eq!(call(&one, "").1, csv);
}

#[test]
fn effort_bench_small() {
    let (code, out, _) = call(
        &["effort-bench", "--n", "100", "--scheme", "systematic,chopthin", "--reps", "3"],
        "",
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 1 + 4);
}

#[test]
fn help_documents_flags_and_schema() {
    let (code, out, _) = call(&["resample", "--help"], "");
    assert_eq!(code, EXIT_OK);
    for flag in ["--scheme", "--eta", "--n-out", "--seed", "--input", "ancestor,weight"] {
        assert!(out.contains(flag), "missing {flag}");
    }
    let (_, out, _) = call(&["mse-study", "--help"], "");
    for flag in ["--sigma-y", "--n", "--steps", "--iterations", "--filter", "--workers", "--format", "ratio_to_systematic"] {
        assert!(out.contains(flag), "missing {flag}");
    }
    let (_, out, _) = call(&["ess-trace", "--help"], "");
    assert!(out.contains("t,scheme,beta,eta,ess_before,ess_after,resampled"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_chopthin");
    // empty input is a validation error
    let empty = Command::new(bin)
        .args(["resample", "--seed", "1", "--input", "/dev/null"])
        .output()
        .unwrap();
    assert_eq!(empty.status.code(), Some(EXIT_INVALID));
    let version = Command::new(bin).arg("--version").output().unwrap();
    assert_eq!(version.status.code(), Some(EXIT_OK));
    let seeded = Command::new(bin)
        .args(["pf-run", "--n", "20", "--steps", "3"])
        .env("CHOPTHIN_SEED", "4")
        .output()
        .unwrap();
    let explicit = Command::new(bin)
        .args(["pf-run", "--n", "20", "--steps", "3", "--seed", "4"])
        .output()
        .unwrap();
    assert_eq!(seeded.stdout, explicit.stdout);
}
