//! CLI I/O contract tests: schema-stable JSON/CSV, deterministic seeded
//! fuzzing, and error handling at the flag boundary.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_thetasum"))
}

const CSV_HEADER: &str =
    "k,j,a,b,eps,value_re,value_im,err_bound,iterations,branch_trace,wall_time_ns,op_count,bits";

#[test]
fn eval_json_schema_and_roundtrip() {
    let out = bin()
        .args([
            "eval", "--k", "10", "--j", "0", "--a", "0", "--b", "0", "--eps", "1e-6", "--json",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let line = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
    for key in [
        "k",
        "j",
        "a",
        "b",
        "eps",
        "value_re",
        "value_im",
        "err_bound",
        "iterations",
        "branch_trace",
        "wall_time_ns",
        "op_count",
        "bits",
    ] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
    // Round-trip: serialize → parse → identical tree.
    let re = serde_json::to_string(&v).unwrap();
    let v2: serde_json::Value = serde_json::from_str(&re).unwrap();
    assert_eq!(v, v2);
    // All eleven terms are 1, so the value is exactly 11.
    let re_str = v["value_re"].as_str().unwrap();
    let re_val: f64 = re_str.parse::<f64>().unwrap_or_else(|_| {
        // Full-precision decimal strings keep an exponent suffix.
        let mantissa_exp = re_str.split('e').collect::<Vec<_>>();
        mantissa_exp[0].parse::<f64>().unwrap() * 10f64.powi(mantissa_exp[1].parse().unwrap())
    });
    assert!((re_val - 11.0).abs() < 1e-9);
    assert_eq!(v["iterations"], 0);
    assert_eq!(v["branch_trace"][0], "direct");
}

#[test]
fn eval_csv_header_is_stable() {
    let out = bin()
        .args([
            "eval", "--k", "100", "--j", "1", "--a", "1/8", "--b", "3/16", "--eps", "1e-8",
            "--csv",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let row = lines.next().unwrap();
    assert!(row.starts_with("100,1,1/8,3/16,"));
}

#[test]
fn eval_values_are_reproducible() {
    let run = || {
        let out = bin()
            .args([
                "eval", "--k", "5000", "--j", "2", "--a", "0.313", "--b", "0.207", "--eps",
                "1e-8", "--json",
            ])
            .output()
            .unwrap();
        assert!(out.status.success());
        let v: serde_json::Value =
            serde_json::from_str(String::from_utf8(out.stdout).unwrap().trim()).unwrap();
        (
            v["value_re"].as_str().unwrap().to_string(),
            v["value_im"].as_str().unwrap().to_string(),
            v["op_count"].as_u64().unwrap(),
        )
    };
    let a = run();
    let b = run();
    assert_eq!(a, b, "repeated evaluation must be bit-identical");
}

#[test]
fn fuzz_replays_deterministically() {
    let run = || {
        let out = bin()
            .args([
                "fuzz", "--seed", "7", "--cases", "3", "--kmin", "500", "--kmax", "4000",
                "--jmax", "2", "--eps", "1e-7",
            ])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let text = String::from_utf8(out.stdout).unwrap();
        // Strip the wall-clock field; everything else must replay exactly.
        text.lines()
            .map(|l| {
                let mut v: serde_json::Value =
                    serde_json::from_str(l.split(" # ").next().unwrap()).unwrap();
                v.as_object_mut().unwrap().remove("wall_time_ns");
                serde_json::to_string(&v).unwrap()
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn count_example_and_crosscheck() {
    let out = bin()
        .args([
            "count", "--m", "2", "--k", "3", "--s", "1", "--t", "1", "--alpha", "1,1", "--beta",
            "0,0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("8 "), "got {text:?}");
    assert!(text.contains("cross-checked"));
}

#[test]
fn oracle_refusal_and_flag_errors() {
    // Infeasible oracle request → explicit refusal, nonzero exit.
    let out = bin()
        .args([
            "oracle",
            "--kind",
            "theta",
            "--k",
            "200000000",
            "--max-terms",
            "1000",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("infeasible"), "stderr: {err}");

    // Malformed flags → usage error.
    let out = bin().args(["eval", "--k", "notanumber"]).output().unwrap();
    assert!(!out.status.success());

    // Bad eps → named error.
    let out = bin()
        .args(["eval", "--k", "10", "--a", "0", "--b", "0", "--eps", "0.9"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("eps"), "stderr: {err}");
}

#[test]
fn bench_emits_monotone_grid_and_fit() {
    let out = bin()
        .args([
            "bench", "--kmin", "1000", "--kmax", "16000", "--points", "3", "--eps", "1e-6",
            "--lambda", "256",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    let ks: Vec<u64> = text
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ks, vec![1000, 4000, 16000]);
    assert!(text.contains("fitted exponent"));
}
