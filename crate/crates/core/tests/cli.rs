use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nalgebra::{DMatrix, DVector};
use quadinfer::cli::ingest::ingest_csv;
use quadinfer::cli::report::Report;
use quadinfer::linalg::{ols_fit, Dataset};
use quadinfer::onesample::{test_rho, Method};
use quadinfer::Error;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_quadinfer");

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(text.as_bytes()).unwrap();
    path
}

fn tokens() -> Vec<String> {
    vec![String::new(), "NA".to_string()]
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_threads(args: &[&str], threads: usize) -> Output {
    Command::new(BIN)
        .env("RAYON_NUM_THREADS", threads.to_string())
        .args(args)
        .output()
        .unwrap()
}

/// Deterministic pseudo-data with a known linear signal.
fn synthetic_csv(n: usize, p: usize, shift: f64) -> String {
    let mut s = String::from("y");
    for j in 0..p {
        s += &format!(",x{j}");
    }
    s.push('\n');
    for i in 0..n {
        let xs: Vec<f64> = (0..p)
            .map(|j| (((i * 7 + j * 13) % 17) as f64 - 8.0) / 5.0 + ((i * j) as f64 * 0.37).sin())
            .collect();
        let noise = ((i as f64) * 1.7).sin() * 1.3 + ((i * i) as f64 * 0.11).cos();
        let y: f64 = xs
            .iter()
            .enumerate()
            .map(|(j, x)| x * (0.3 + shift * j as f64 / p as f64))
            .sum::<f64>()
            + noise;
        s += &format!("{y}");
        for x in xs {
            s += &format!(",{x}");
        }
        s.push('\n');
    }
    s
}

#[test]
fn ingest_matches_hand_example() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "y,x1\n2,1\n4,1\n6,1\n");
    let data = ingest_csv(&path, "y", false, &tokens()).unwrap();
    let expected = Dataset::new(DVector::from_vec(vec![2.0, 4.0, 6.0]), DMatrix::from_element(3, 1, 1.0)).unwrap();
    assert_eq!(data.dataset, expected);
    let fit = ols_fit(&data.dataset).unwrap();
    assert!((fit.beta_hat[0] - 4.0).abs() < 1e-12);
    assert!((fit.sigma2_hat - 4.0).abs() < 1e-12);
}

#[test]
fn response_by_index() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "x1,y\n1,2\n1,4\n1,6\n");
    let data = ingest_csv(&path, "1", false, &tokens()).unwrap();
    assert_eq!(data.response, "y");
    assert_eq!(data.dataset.y.as_slice(), &[2.0, 4.0, 6.0]);
}

#[test]
fn missing_cell_takes_column_mean() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "y,x1,x2\n1,2,0\n2,NA,1\n3,6,0\n4,1,1\n");
    let data = ingest_csv(&path, "y", false, &tokens()).unwrap();
    assert_eq!(data.dataset.x[(1, 0)], 3.0);
    assert_eq!(data.imputed.get("x1"), Some(&1));
    assert_eq!(data.imputed.len(), 1);

    let blank = write(dir.path(), "e.csv", "y,x1,x2\n1,2,0\n2,,1\n3,6,0\n4,1,1\n");
    assert_eq!(
        ingest_csv(&blank, "y", false, &tokens()).unwrap().dataset.x[(1, 0)],
        3.0
    );
}

#[test]
fn imputation_precedes_centering() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "y,x1,x2\n1,2,0\n2,NA,1\n3,6,0\n4,1,1\n");
    let data = ingest_csv(&path, "y", true, &tokens()).unwrap();
    // the imputed cell equals the column mean, so it centers to zero
    assert_eq!(data.dataset.x[(1, 0)], 0.0);
    assert!(data.dataset.centered);
}

#[test]
fn custom_missing_tokens() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "y,x1\n1,2\n2,?\n3,4\n");
    assert!(matches!(
        ingest_csv(&path, "y", false, &tokens()),
        Err(Error::Parse { .. })
    ));
    let data = ingest_csv(&path, "y", false, &["?".to_string()]).unwrap();
    assert_eq!(data.dataset.x[(1, 0)], 3.0);
}

#[test]
fn duplicated_column_is_dropped_and_named() {
    let dir = TempDir::new().unwrap();
    let path = write(
        dir.path(),
        "d.csv",
        "y,a,b,a2\n1,1,0,1\n2,2,1,2\n3,0,1,0\n4,5,3,5\n5,1,1,1\n",
    );
    let data = ingest_csv(&path, "y", false, &tokens()).unwrap();
    assert_eq!(data.dropped, vec!["a2".to_string()]);
    assert_eq!(data.predictors, vec!["a".to_string(), "b".to_string()]);
    assert_eq!(data.dataset.p(), 2);
}

#[test]
fn parse_error_reports_location() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "y,x1\n1,2\n2,abc\n");
    match ingest_csv(&path, "y", false, &tokens()) {
        Err(Error::Parse { row, column, .. }) => {
            assert_eq!(row, 2);
            assert_eq!(column, "x1");
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn absent_response_is_config_error() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", "y,x1\n1,2\n2,3\n");
    assert!(matches!(
        ingest_csv(&path, "z", false, &tokens()),
        Err(Error::Config(_))
    ));
}

#[test]
fn rho_test_matches_library() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", &synthetic_csv(60, 5, 1.0));
    let out = run(&[
        "test",
        "--input",
        path.to_str().unwrap(),
        "--response",
        "y",
        "--kind",
        "rho",
        "--null",
        "0.2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = Report::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(report.results.len(), 1);
    assert_eq!(report.results[0].name, "rho");

    let data = ingest_csv(&path, "y", true, &tokens()).unwrap();
    let fit = ols_fit(&data.dataset).unwrap();
    let direct = test_rho(&fit, 0.2, 0.05, Method::Proposed).unwrap();
    assert_eq!(report.results[0].result, direct);
    assert_eq!(report.meta.version, quadinfer::VERSION);
    assert_eq!(report.meta.config["kind"], "rho");
    assert_eq!(report.meta.config["center"], true);
}

#[test]
fn every_one_sample_kind_runs() {
    let dir = TempDir::new().unwrap();
    let path = write(dir.path(), "d.csv", &synthetic_csv(80, 6, 1.0));
    let input = path.to_str().unwrap();
    for (kind, null) in [
        ("quad-norm", Some("1")),
        ("conventional", Some("1")),
        ("signal", None),
        ("global", Some("0")),
        ("error-variance", Some("1")),
        ("rho", Some("0.5")),
        ("rho-conventional", Some("0.5")),
        ("eta", Some("1")),
        ("linear", Some("0")),
    ] {
        let mut args = vec!["test", "--input", input, "--response", "y", "--kind", kind];
        if let Some(v) = null {
            args.extend(["--null", v]);
        }
        let out = run(&args);
        assert!(out.status.success(), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "d.csv", &synthetic_csv(40, 3, 0.0));
    let good = good.to_str().unwrap();

    // configuration problems
    assert_eq!(
        run(&[
            "test",
            "--input",
            good,
            "--response",
            "nope",
            "--kind",
            "rho",
            "--null",
            "0.2"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["test", "--input", good, "--response", "y", "--kind", "rho"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["test", "--input", good, "--response", "y", "--kind", "bogus"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "test",
            "--input",
            "/nonexistent.csv",
            "--response",
            "y",
            "--kind",
            "signal"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "test",
            "--input",
            good,
            "--response",
            "y",
            "--kind",
            "signal",
            "--center",
            "--no-center"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        run(&["simulate", "--case", "I", "--n", "10", "--p", "10"])
            .status
            .code(),
        Some(2)
    );

    // a constant predictor vanishes after centering
    let constant = write(dir.path(), "c.csv", "y,x1\n1,5\n2,5\n4,5\n");
    assert_eq!(
        run(&[
            "test",
            "--input",
            constant.to_str().unwrap(),
            "--response",
            "y",
            "--kind",
            "signal"
        ])
        .status
        .code(),
        Some(3)
    );
    // perfect fit leaves no residual variance for the signal test
    let exact = write(dir.path(), "e.csv", "y,x1\n1,1\n2,2\n3,3\n5,5\n");
    assert_eq!(
        run(&[
            "test",
            "--input",
            exact.to_str().unwrap(),
            "--response",
            "y",
            "--kind",
            "signal"
        ])
        .status
        .code(),
        Some(3)
    );
}

#[test]
fn two_sample_command() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.csv", &synthetic_csv(70, 4, 0.0));
    let b = write(dir.path(), "b.csv", &synthetic_csv(90, 4, 2.0));
    let (a, b) = (a.to_str().unwrap(), b.to_str().unwrap());
    let out = run(&["two-sample", "--input", a, "--input", b, "--response", "y"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = Report::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(report.results[0].name, "two-sample-equality");

    let out = run(&[
        "two-sample",
        "--input",
        a,
        "--input",
        b,
        "--response",
        "y",
        "--kind",
        "coheritability",
        "--null",
        "0.5",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    assert_eq!(
        run(&["two-sample", "--input", a, "--response", "y"]).status.code(),
        Some(2)
    );
    let c = write(dir.path(), "c.csv", &synthetic_csv(90, 5, 2.0));
    assert_eq!(
        run(&[
            "two-sample",
            "--input",
            a,
            "--input",
            c.to_str().unwrap(),
            "--response",
            "y"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn report_round_trips() {
    let out = run(&[
        "simulate", "--case", "II", "--n", "50", "--p", "8", "--reps", "15", "--seed", "4", "--test", "rho",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let report = Report::from_json(&text).unwrap();
    assert_eq!(report.to_json().unwrap(), text);
    assert_eq!(Report::from_json(&report.to_json().unwrap()).unwrap(), report);
    assert_eq!(report.meta.seed, Some(4));
    assert_eq!(report.meta.config["reps"], 15);
    assert_eq!(report.meta.config["test"], "rho");
    assert!(report.meta.timestamps.is_none());
}

#[test]
fn simulate_is_deterministic_across_threads() {
    let args = [
        "simulate",
        "--case",
        "I",
        "--n",
        "80",
        "--p",
        "20",
        "--reps",
        "40",
        "--test",
        "quad-norm",
        "--null-norm",
        "1",
        "--seed",
        "7",
    ];
    let a = run_threads(&args, 1);
    let b = run_threads(&args, 4);
    let c = run_threads(&args, 4);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
    let other = run_threads(
        &[
            "simulate", "--case", "I", "--n", "80", "--p", "20", "--reps", "40", "--seed", "8",
        ],
        4,
    );
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn timestamps_are_opt_in() {
    let out = run(&[
        "simulate",
        "--case",
        "I",
        "--n",
        "30",
        "--p",
        "3",
        "--reps",
        "5",
        "--timestamps",
    ]);
    let report = Report::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let ts = report.meta.timestamps.unwrap();
    assert!(ts.started.starts_with("unix:"));
}

#[test]
fn plot_data_files() {
    let dir = TempDir::new().unwrap();
    let plots = dir.path().join("plots");
    let report_path = dir.path().join("r.json");
    let out = run(&[
        "simulate",
        "--case",
        "III",
        "--n",
        "60",
        "--p",
        "6",
        "--reps",
        "30",
        "--test",
        "signal",
        "--alternative",
        "signal",
        "--deltas",
        "0,3,6",
        "--out",
        report_path.to_str().unwrap(),
        "--plot-data",
        plots.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert!(report_path.exists());

    let qq = std::fs::read_to_string(plots.join("qq.csv")).unwrap();
    let lines: Vec<&str> = qq.lines().collect();
    assert_eq!(lines[0], "cell,test,delta,rank,expected,observed");
    assert_eq!(lines.len(), 1 + 3 * 30);
    let observed: Vec<f64> = lines[1..31]
        .iter()
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(observed.windows(2).all(|w| w[0] <= w[1]));

    let power = std::fs::read_to_string(plots.join("power.csv")).unwrap();
    assert_eq!(power.lines().count(), 1 + 3);
}

#[test]
fn reproduce_coverage_shape() {
    let out = run(&[
        "reproduce",
        "--table",
        "coverage",
        "--reps",
        "10",
        "--n",
        "60",
        "--case",
        "I,IV",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = Report::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let table = &report.tables[0];
    assert_eq!(table.name, "coverage");
    assert_eq!(&table.columns[..4], &["case", "n", "p", "region-two-sided"]);
    // p grid 4, 10, 15, 24 for n = 60, crossed with two cases
    assert_eq!(table.rows.len(), 8);
    assert_eq!(report.meta.config["reps"], 10);
}

#[test]
fn reproduce_is_deterministic() {
    let args = [
        "reproduce",
        "--table",
        "calibration",
        "--reps",
        "12",
        "--n",
        "48",
        "--p",
        "6",
        "--case",
        "II",
    ];
    let a = run_threads(&args, 1);
    let b = run_threads(&args, 3);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn reproduce_power_trims_unreachable_variance_grid() {
    // √60 < 10, so δ ∈ {−10, −8} would make σ² nonpositive
    let out = run(&[
        "reproduce",
        "--table",
        "power",
        "--reps",
        "5",
        "--n",
        "60",
        "--p",
        "6",
        "--case",
        "I",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = Report::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    let rows = &report.tables[0].rows;
    let variance: Vec<f64> = rows
        .iter()
        .filter(|r| r[3] == "error-variance")
        .map(|r| r[4].as_f64().unwrap())
        .collect();
    assert_eq!(variance.first(), Some(&-6.0));
    assert_eq!(variance.len(), 9);
    assert!(report
        .warnings
        .iter()
        .any(|w| w.contains("dropped 2 error-variance grid values")));
}
