use std::fs;
use std::path::{Path, PathBuf};

use msc::expcli::{cli_main, read_trace_csv, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn pima() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data/pima.csv")
        .display()
        .to_string()
}

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("msc").chain(args.iter().copied()))
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn ten_iterations_give_ten_trace_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&[
        "skewnormal",
        "--iters",
        "10",
        "--replications",
        "1",
        "--out",
        out,
    ]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_trace_csv(&dir.path().join("trace_000.csv")).unwrap();
    assert_eq!(rows.len(), 10);
    assert_eq!(
        header,
        [
            "iteration",
            "mu_0",
            "log_sigma_0",
            "grad_norm",
            "ess",
            "max_weight",
            "sticky"
        ]
    );
    let iters: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(iters, (1..=10).map(f64::from).collect::<Vec<_>>());
}

#[test]
fn documented_skewnormal_invocation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let code = run(&[
        "skewnormal",
        "--samples",
        "2",
        "--estimator",
        "msc-cis",
        "--iters",
        "50000",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(out.join("summary.json").exists());
    assert!(out.join("config.txt").exists());
    // K > 10⁴: traces thinned 1-in-10
    let (_, rows) = read_trace_csv(&out.join("trace_000.csv")).unwrap();
    assert_eq!(rows.len(), 5_000);
    assert_eq!(summary(&out)["replications"].as_array().unwrap().len(), 10);
}

#[test]
fn usage_errors() {
    assert_eq!(run(&["probit"]), EXIT_USAGE);
    assert_eq!(run(&["skewnormal", "--no-such-flag"]), EXIT_USAGE);
    assert_eq!(run(&["skewnormal", "--estimator", "msc-csmc"]), EXIT_USAGE);
    assert_eq!(run(&["skewnormal", "--schedule", "sgd"]), EXIT_USAGE);
    assert_eq!(
        run(&["stochvol", "--config", "/definitely/not/here.cfg"]),
        EXIT_USAGE
    );
}

#[test]
fn runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(
        run(&[
            "probit",
            "--dataset",
            missing.to_str().unwrap(),
            "--out",
            out
        ]),
        EXIT_RUNTIME
    );
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,0\n").unwrap();
    assert_eq!(
        run(&["probit", "--dataset", bad.to_str().unwrap(), "--out", out]),
        EXIT_RUNTIME
    );
}

#[test]
fn kernelcheck_prints_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&[
        "kernelcheck",
        "--target",
        "conjugate",
        "--iters",
        "50000",
        "--out",
        out,
    ]);
    assert_eq!(code, EXIT_OK);
    let s = summary(dir.path());
    let rows = s["rows"].as_array().unwrap();
    assert!(rows.iter().any(|r| r["statistic"] == "mean"));
    assert!(rows.iter().all(|r| r["suite"] == "cis"));
}

#[test]
fn probit_summary_lists_every_split() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let code = run(&[
        "probit",
        "--dataset",
        &pima(),
        "--iters",
        "20",
        "--out",
        out,
    ]);
    assert_eq!(code, EXIT_OK);
    let s = summary(dir.path());
    let errors = s["aggregate"]["test_errors"].as_array().unwrap();
    assert_eq!(errors.len(), 100);
    assert!(s["aggregate"]["mean"].is_f64() && s["aggregate"]["std"].is_f64());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = d.path().to_str().unwrap();
        assert_eq!(
            run(&[
                "subsetavg",
                "--iters",
                "2000",
                "--replications",
                "4",
                "--out",
                out
            ]),
            EXIT_OK
        );
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("summary.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    let trace = |d: &tempfile::TempDir| fs::read(d.path().join("trace_002.csv")).unwrap();
    assert_eq!(trace(&a), trace(&b));
}

#[test]
fn worker_count_does_not_change_results() {
    let one = tempfile::tempdir().unwrap();
    let eight = tempfile::tempdir().unwrap();
    let args = |d: &tempfile::TempDir, w: &'static str| {
        let out = d.path().to_str().unwrap().to_string();
        vec![
            "probit".to_string(),
            "--dataset".into(),
            pima(),
            "--iters".into(),
            "50".into(),
            "--replications".into(),
            "12".into(),
            "--workers".into(),
            w.into(),
            "--out".into(),
            out,
        ]
    };
    assert_eq!(
        cli_main(std::iter::once("msc".to_string()).chain(args(&one, "1"))),
        EXIT_OK
    );
    assert_eq!(
        cli_main(std::iter::once("msc".to_string()).chain(args(&eight, "8"))),
        EXIT_OK
    );
    assert_eq!(
        fs::read(one.path().join("summary.json")).unwrap(),
        fs::read(eight.path().join("summary.json")).unwrap()
    );
}

#[test]
fn written_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let out = first.path().to_str().unwrap();
    assert_eq!(
        run(&[
            "stochvol",
            "--iters",
            "200",
            "--series-len",
            "50",
            "--eval-samples",
            "200",
            "--eval-sweeps",
            "3",
            "--seed",
            "5",
            "--out",
            out
        ]),
        EXIT_OK
    );
    let second = tempfile::tempdir().unwrap();
    let cfg = first.path().join("config.txt");
    let out2 = second.path().to_str().unwrap();
    // the file overrides flags, except `out`, which we also set in the file
    let text = fs::read_to_string(&cfg).unwrap().replace(out, out2);
    let cfg2 = second.path().join("config.txt.in");
    fs::write(&cfg2, text).unwrap();
    assert_eq!(
        run(&[
            "stochvol",
            "--seed",
            "99",
            "--config",
            cfg2.to_str().unwrap()
        ]),
        EXIT_OK
    );
    assert_eq!(
        fs::read(first.path().join("summary.json")).unwrap(),
        fs::read(second.path().join("summary.json")).unwrap()
    );
}

#[test]
fn trace_files_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&[
            "stochvol",
            "--iters",
            "30",
            "--series-len",
            "20",
            "--eval-samples",
            "50",
            "--eval-sweeps",
            "2",
            "--out",
            out
        ]),
        EXIT_OK
    );
    let (header, rows) = read_trace_csv(&dir.path().join("trace_000.csv")).unwrap();
    assert_eq!(&header[1..5], ["log_sigma2", "atanh_phi", "mu", "log_beta"]);
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r.len() == header.len()));
}
