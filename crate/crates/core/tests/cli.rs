use std::path::Path;
use std::process::{Command, Output};

use cffcm::bench::read_report;

fn cffcm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cffcm"))
        .args(args)
        .env("CFFCM_OUTPUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn usage_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &[][..],
        &["frobnicate"],
        &["solve", "--bogus"],
        &["solve", "--alpha", "1.5"],
        &["solve", "--n", "1"],
        &["solve", "--solver", "lu"],
        &["solve", "--problem", "heat"],
        &["temporal-study", "--nt", "10,30"],
        &["derivative-bench", "--case", "2"],
        &["solve", "--config", "/nonexistent/cffcm.conf"],
    ] {
        let out = cffcm(dir.path(), args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn help_exits_with_0() {
    let dir = tempfile::tempdir().unwrap();
    let out = cffcm(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("temporal-study"));
}

#[test]
fn unreachable_tolerance_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = cffcm(dir.path(), &["solve", "--n", "12", "--nt", "4", "--tol", "1e-30"]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn homogeneous_solve_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = cffcm(
        dir.path(),
        &["solve", "--problem", "homogeneous", "--n", "10", "--nt", "20"],
    );
    assert_eq!(code(&out), 0);
    let report = read_report(&dir.path().join("solve.csv")).unwrap();
    for name in ["e_inf", "e_0", "e_1"] {
        assert_eq!(report.column(name).unwrap(), vec![0.0]);
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "# three-term solve\nn = 8\nnt = 10\ncase = 4\nt = 0.5\n").unwrap();
    let conf = conf.to_str().unwrap();

    let out = cffcm(dir.path(), &["solve", "--config", conf]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("N=8 N_T=10 t=0.5"), "{stdout}");

    let out = cffcm(dir.path(), &["solve", "--config", conf, "--nt", "20"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("N=8 N_T=20 t=0.5"));

    std::fs::write(dir.path().join("bad.conf"), "signal = power4\n").unwrap();
    let bad = dir.path().join("bad.conf");
    let out = cffcm(dir.path(), &["solve", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn spatial_study_writes_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = cffcm(
        dir.path(),
        &["spatial-study", "--n", "4,6,8", "--dt", "1e-3", "--t", "0.01"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read_report(&dir.path().join("spatial_study.csv")).unwrap();
    assert_eq!(csv.rows.len(), 3);
    let dat = std::fs::read_to_string(dir.path().join("spatial_study.dat")).unwrap();
    assert!(dat.lines().any(|l| !l.is_empty() && !l.starts_with('#')));
}

#[test]
fn derivative_bench_reports_both_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = cffcm(
        dir.path(),
        &[
            "derivative-bench",
            "--signal",
            "cos5",
            "--nt",
            "100,200,400",
            "--repeats",
            "1",
        ],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&dir.path().join("derivative_bench_cos5.csv")).unwrap();
    assert_eq!(report.rows.len(), 3);
    assert!(report.column("E1").is_some() && report.column("E2").is_some());
    assert!(report.cpu_column("cpu_direct").is_some() && report.cpu_column("cpu_fast").is_some());
}

#[test]
fn repeated_runs_differ_only_in_timings() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["temporal-study", "--n", "10", "--nt", "10,20,40", "--case", "3"];
    let mut reports = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let mut full: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_owned();
        full.extend(["--output", &p]);
        assert_eq!(code(&cffcm(dir.path(), &full)), 0);
        reports.push(read_report(&path).unwrap());
    }
    let (a, b) = (&reports[0], &reports[1]);
    assert_eq!(a.metadata, b.metadata);
    assert_eq!(a.error_names, b.error_names);
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.resolution.to_bits(), rb.resolution.to_bits());
        assert_eq!(ra.errors, rb.errors);
        assert_eq!(ra.rates, rb.rates);
    }
}
