use std::process::{Command, Output};

use serde_json::Value;

fn finitechain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finitechain"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.push("--json");
    serde_json::from_str(&stdout(&finitechain(&all))).unwrap()
}

#[test]
fn compute_reports_both_methods() {
    let v = json(&[
        "compute", "--I", "0.4", "--L", "100", "--L0", "98", "--La", "98",
    ]);
    assert_eq!(v["m0"], 1);
    assert_eq!(v["La"], 98);
    let p = v["p_dp"].as_f64().unwrap();
    assert!((p - 0.2368).abs() < 1e-12);
    assert!(v["abs_diff"].as_f64().unwrap() <= 1e-12);

    let v = json(&[
        "compute", "--I", "0.4", "--L", "100", "--L0", "98", "--La", "97", "--method", "dp",
    ]);
    assert!((v["p_dp"].as_f64().unwrap() - 0.11008).abs() < 1e-12);
    assert!(v["p_closed"].is_null());
}

#[test]
fn monte_carlo_and_race_agree_on_successes() {
    let args = [
        "--I", "0.3", "--L", "40", "--L0", "20", "--La", "18", "--runs", "3000", "--seed", "5",
    ];
    let mc = json(&[&["mc"][..], &args].concat());
    let race = json(&[&["chain-race"][..], &args].concat());
    for key in ["p_hat", "stderr", "runs", "seed", "successes"] {
        assert!(!mc[key].is_null(), "mc missing {key}");
    }
    for key in ["wins", "runs", "p_hat", "stderr", "mean_steps"] {
        assert!(!race[key].is_null(), "chain-race missing {key}");
    }
    assert_eq!(mc["successes"], race["wins"]);
}

#[test]
fn coeffs_print_one_integer_per_line() {
    let out = stdout(&finitechain(&["coeffs", "--i", "0:4", "--m", "0"]));
    assert_eq!(out, "1\n1\n2\n5\n14\n");
    let out = stdout(&finitechain(&[
        "coeffs", "--i", "5", "--m", "8", "--oracle", "brute",
    ]));
    assert_eq!(out, "5508\n");
    let big = stdout(&finitechain(&["coeffs", "--i", "40", "--m", "0"]));
    assert_eq!(big.trim(), "2622127042276492108820");
}

#[test]
fn sweep_csv_is_byte_identical_across_runs_and_threads() {
    let args = [
        "sweep", "--preset", "fig5", "--mc", "--runs", "500", "--seed", "9",
    ];
    let a = stdout(&finitechain(&args));
    let b = stdout(&finitechain(&[&args[..], &["--threads", "1"]].concat()));
    let c = stdout(&finitechain(&[&args[..], &["--threads", "4"]].concat()));
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.starts_with("La,L0,L,I,m0,p_exact,p_asymptotic,p_mc,mc_stderr,runs,seed\n"));
    assert_eq!(a.lines().count(), 1 + 40);
}

#[test]
fn sweep_values_match_compute() {
    let rows = json(&["sweep", "--preset", "fig6", "--La", "30", "--L0", "40,60"]);
    for row in rows.as_array().unwrap() {
        let l0 = row["L0"].to_string();
        let v = json(&[
            "compute", "--I", "0.4", "--L", "100", "--L0", &l0, "--La", "30", "--method", "dp",
        ]);
        assert_eq!(row["p_exact"], v["p_dp"]);
    }
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.csv");
    let out = finitechain(&[
        "compare-asymptotic",
        "--m",
        "0",
        "--n",
        "3",
        "--I",
        "0.4",
        "--L",
        "10:500:10",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 51);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "500");
    assert!(last[3].parse::<f64>().unwrap() < 1e-6);
}

#[test]
fn invalid_arguments_exit_with_two() {
    let cases: &[&[&str]] = &[
        &[
            "compute", "--I", "1.5", "--L", "10", "--L0", "5", "--La", "2",
        ],
        &[
            "compute", "--I", "0.3", "--L", "10", "--L0", "5", "--La", "6",
        ],
        &[
            "compute", "--I", "0.3", "--L", "10", "--L0", "10", "--La", "2",
        ],
        &[
            "mc", "--I", "0.3", "--L", "10", "--L0", "5", "--La", "2", "--runs", "0",
        ],
        &["coeffs", "--i", "20", "--m", "5", "--oracle", "brute"],
        &["sweep", "--La", "5", "--L0", "3", "--L", "10", "--I", "0.3"],
        &["sweep"],
        &["sweep", "--preset", "fig9"],
        &[
            "compare-asymptotic",
            "--m",
            "0",
            "--n",
            "3",
            "--I",
            "0.4",
            "--L",
            "3",
        ],
        &[
            "compute",
            "--threads",
            "0",
            "--I",
            "0.3",
            "--L",
            "10",
            "--L0",
            "5",
            "--La",
            "2",
        ],
        &["frobnicate"],
    ];
    for args in cases {
        let out = finitechain(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty(), "{args:?} wrote to stdout");
    }
}
