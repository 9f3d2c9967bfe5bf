//! Command-line driver.
//!
//! Exit status: 0 on success, 2 for usage, configuration or input errors,
//! 3 for numerical degeneracy.

pub mod ingest;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{ols_fit, ModelFit};
use crate::onesample::{
    linear_functional_inference, test_conventional, test_error_variance, test_eta, test_global, test_quad_norm,
    test_rho, test_signal_detection, InferenceResult, Method,
};
use crate::simulation::{
    run_replications, Alternative, AlternativeKind, BetaSpec, Case, NullValue, SimConfig, SimSummary, Target, TestKind,
};
use crate::twosample::{test_coheritability, test_equality, TwoSampleFit};

use ingest::{ingest_csv, Ingested, DEFAULT_MISSING};
use report::{Report, Table, Timestamps, POWER_HEADER, QQ_HEADER};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "quadinfer",
    version,
    about = "Inference for quadratic functionals of least-squares coefficients"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-sample inference on a CSV dataset.
    Test(TestArgs),
    /// Two-sample inference on two CSV datasets sharing predictor columns.
    TwoSample(TwoSampleArgs),
    /// Monte Carlo study of a single configuration.
    Simulate(SimulateArgs),
    /// Experiment grids over sample sizes, dimensions and cases.
    Reproduce(ReproduceArgs),
}

fn parse_kind(s: &str) -> std::result::Result<TestKind, String> {
    s.parse::<TestKind>().map_err(|e| e.to_string())
}

fn parse_case(s: &str) -> std::result::Result<Case, String> {
    s.parse::<Case>().map_err(|e| e.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct CenterArgs {
    /// Center the response and predictors (the default).
    #[arg(long, conflicts_with = "no_center")]
    #[serde(skip)]
    pub center: bool,
    /// Fit without centering.
    #[arg(long)]
    #[serde(skip)]
    pub no_center: bool,
}

impl CenterArgs {
    pub fn enabled(&self) -> bool {
        !self.no_center
    }
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for QQ and power-curve CSV files.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// Record wall-clock start and finish times in the report.
    #[arg(long)]
    pub timestamps: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Response column, by header name or 0-based index.
    #[arg(long)]
    pub response: String,
    #[command(flatten)]
    #[serde(skip)]
    pub center: CenterArgs,
    #[arg(long, visible_alias = "test", value_parser = parse_kind)]
    pub kind: TestKind,
    /// Null value on the scale of the tested parameter (the norm for quad-norm tests).
    #[arg(long, visible_alias = "null-norm", allow_negative_numbers = true)]
    pub null: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Contrast for `linear`, comma separated; defaults to the first predictor.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub contrast: Option<Vec<f64>>,
    /// Missing-value token; repeat for several. Defaults to the empty string and NA.
    #[arg(long = "na-token")]
    pub na_tokens: Vec<String>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct TwoSampleArgs {
    /// The two samples, given as `--input a.csv --input b.csv`.
    #[arg(long, required = true, num_args = 1)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub response: String,
    #[command(flatten)]
    #[serde(skip)]
    pub center: CenterArgs,
    #[arg(long, visible_alias = "test", value_parser = parse_kind, default_value = "two-sample-equality")]
    pub kind: TestKind,
    /// Null angle for the coheritability tests.
    #[arg(long, allow_negative_numbers = true)]
    pub null: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long = "na-token")]
    pub na_tokens: Vec<String>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BetaArg {
    CaseDefault,
    Zero,
    Uniform,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlternativeArg {
    Signal,
    ErrorVariance,
    Difference,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_case)]
    pub case: Case,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, visible_alias = "kind", value_parser = parse_kind, default_value = "quad-norm")]
    pub test: TestKind,
    /// Fixed null value; the generating parameter is used when absent.
    #[arg(long, visible_alias = "null-norm", allow_negative_numbers = true)]
    pub null: Option<f64>,
    #[arg(long, value_enum, default_value = "case-default")]
    pub beta: BetaArg,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, value_enum)]
    pub alternative: Option<AlternativeArg>,
    /// Alternative grid, comma separated; defaults to the grid of the alternative.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "alternative")]
    pub deltas: Option<Vec<f64>>,
    /// Designed angle between the two coefficient vectors.
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// Second sample size; defaults to `n`.
    #[arg(long)]
    pub n2: Option<usize>,
    /// Skip centering of generated data.
    #[arg(long)]
    pub no_center: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableArg {
    /// Confidence-region and interval coverage.
    Coverage,
    /// KS uniformity of null p-values.
    Calibration,
    /// Rejection rates along the alternative grids.
    Power,
}

impl TableArg {
    fn default_reps(self) -> usize {
        match self {
            TableArg::Calibration => 2000,
            TableArg::Coverage => 1000,
            TableArg::Power => 500,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ReproduceArgs {
    #[arg(long, value_enum)]
    pub table: TableArg,
    /// Replications per cell; defaults to 2000 (calibration), 1000 (coverage) or 500 (power).
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "400,800")]
    pub n: Vec<usize>,
    /// Dimensions, comma separated; defaults to 4, n/6, n/4 and n/2.5 for each n.
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    #[arg(long, value_parser = parse_case, value_delimiter = ',', default_value = "I,II,III,IV")]
    #[serde(skip)]
    pub case: Vec<Case>,
    #[command(flatten)]
    #[serde(skip)]
    pub output: OutputArgs,
}

/// Dimension grid `4, ⌊n/6⌋, n/4, n/2.5` (the last two rounded down).
pub fn dimension_grid(n: usize) -> Vec<usize> {
    let mut ps = vec![4, n / 6, n / 4, (n as f64 / 2.5).floor() as usize];
    ps.dedup();
    ps
}

fn now() -> String {
    let t = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("unix:{}.{:03}", t.as_secs(), t.subsec_millis())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn na_tokens(given: &[String]) -> Vec<String> {
    if given.is_empty() {
        DEFAULT_MISSING.iter().map(|s| s.to_string()).collect()
    } else {
        given.to_vec()
    }
}

fn ingest_warnings(report: &mut Report, label: &str, data: &Ingested) {
    for col in &data.dropped {
        report.warnings.push(format!(
            "{label}: dropped column '{col}' (linearly dependent on earlier columns)"
        ));
    }
    for (col, count) in &data.imputed {
        report.warnings.push(format!(
            "{label}: imputed {count} missing cells in '{col}' by the column mean"
        ));
    }
}

fn require_null(null: Option<f64>, kind: TestKind) -> Result<f64> {
    null.ok_or_else(|| Error::Config(format!("--null is required for --kind {}", kind.name())))
}

/// One-sample inference for `kind` on an already fitted model.
pub fn one_sample_result(
    fit: &ModelFit,
    kind: TestKind,
    null: Option<f64>,
    alpha: f64,
    contrast: Option<&[f64]>,
) -> Result<InferenceResult> {
    match kind {
        TestKind::QuadNorm => test_quad_norm(fit, require_null(null, kind)?, alpha),
        TestKind::Conventional => test_conventional(fit, require_null(null, kind)?, alpha),
        TestKind::Signal => {
            if null.is_some_and(|v| v != 0.0) {
                return Err(Error::Config("signal detection tests a zero null; drop --null".into()));
            }
            test_signal_detection(fit, alpha)
        }
        TestKind::Global => {
            let null = DVector::from_element(fit.p(), null.unwrap_or(0.0));
            test_global(fit, &null, alpha)
        }
        TestKind::ErrorVariance => test_error_variance(fit, &fit.residuals, require_null(null, kind)?, alpha),
        TestKind::Rho => test_rho(fit, require_null(null, kind)?, alpha, Method::Proposed),
        TestKind::RhoConventional => test_rho(fit, require_null(null, kind)?, alpha, Method::Conventional),
        TestKind::Eta => test_eta(fit, require_null(null, kind)?, alpha),
        TestKind::Linear => {
            let c = match contrast {
                Some(c) if c.len() != fit.p() => {
                    return Err(Error::Config(format!(
                        "contrast has {} entries but the fitted design has {} columns",
                        c.len(),
                        fit.p()
                    )))
                }
                Some(c) => DVector::from_column_slice(c),
                None => {
                    let mut e = DVector::zeros(fit.p());
                    e[0] = 1.0;
                    e
                }
            };
            linear_functional_inference(fit, &c, null.unwrap_or(0.0), alpha)
        }
        k => Err(Error::Config(format!(
            "'{}' is a two-sample test; use the two-sample command",
            k.name()
        ))),
    }
}

fn finish(report: &mut Report, output: &OutputArgs, started: Option<String>) -> Result<Option<String>> {
    if let Some(started) = started {
        report.meta.timestamps = Some(Timestamps {
            started,
            finished: now(),
        });
    }
    let text = report.to_json()?;
    match &output.out {
        Some(path) => {
            report::write_text(path, &text)?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

fn cmd_test(args: &TestArgs) -> Result<Option<String>> {
    let started = args.output.timestamps.then(now);
    let data = ingest_csv(
        &args.input,
        &args.response,
        args.center.enabled(),
        &na_tokens(&args.na_tokens),
    )?;
    let mut config = to_value(args);
    config["center"] = json!(args.center.enabled());
    config["na_tokens"] = json!(na_tokens(&args.na_tokens));
    config["data"] = to_value(&data.summary(&args.input));
    let mut report = Report::new("test", None, config);
    ingest_warnings(&mut report, "input", &data);
    let fit = ols_fit(&data.dataset)?;
    let result = one_sample_result(&fit, args.kind, args.null, args.alpha, args.contrast.as_deref())?;
    report.add_result(args.kind.name(), result);
    finish(&mut report, &args.output, started)
}

fn cmd_two_sample(args: &TwoSampleArgs) -> Result<Option<String>> {
    let started = args.output.timestamps.then(now);
    if args.input.len() != 2 {
        return Err(Error::Config(format!(
            "two-sample needs exactly two --input files, got {}",
            args.input.len()
        )));
    }
    if !args.kind.is_two_sample() {
        return Err(Error::Config(format!(
            "'{}' is a one-sample test; use the test command",
            args.kind.name()
        )));
    }
    let tokens = na_tokens(&args.na_tokens);
    let a = ingest_csv(&args.input[0], &args.response, args.center.enabled(), &tokens)?;
    let b = ingest_csv(&args.input[1], &args.response, args.center.enabled(), &tokens)?;
    if a.predictors != b.predictors {
        return Err(Error::Config(format!(
            "the samples must share predictor columns after rank repair: [{}] vs [{}]",
            a.predictors.join(", "),
            b.predictors.join(", ")
        )));
    }
    let mut config = to_value(args);
    config["center"] = json!(args.center.enabled());
    config["na_tokens"] = json!(tokens);
    config["data"] = json!([a.summary(&args.input[0]), b.summary(&args.input[1])]);
    let mut report = Report::new("two-sample", None, config);
    ingest_warnings(&mut report, "first input", &a);
    ingest_warnings(&mut report, "second input", &b);
    let ts = TwoSampleFit::new(ols_fit(&a.dataset)?, ols_fit(&b.dataset)?)?;
    let result = match args.kind {
        TestKind::TwoSampleEquality => {
            if args.null.is_some_and(|v| v != 0.0) {
                return Err(Error::Config("the equality test has a zero null; drop --null".into()));
            }
            test_equality(&ts, args.alpha)?
        }
        TestKind::Coheritability => {
            test_coheritability(&ts, require_null(args.null, args.kind)?, args.alpha, Method::Proposed)?
        }
        _ => test_coheritability(
            &ts,
            require_null(args.null, args.kind)?,
            args.alpha,
            Method::Conventional,
        )?,
    };
    report.add_result(args.kind.name(), result);
    finish(&mut report, &args.output, started)
}

impl SimulateArgs {
    pub fn config(&self) -> SimConfig {
        let mut cfg = SimConfig::new(self.case, self.n, self.p);
        cfg.reps = self.reps;
        cfg.seed = self.seed;
        cfg.alpha = self.alpha;
        cfg.test = self.test;
        cfg.null = self.null.map_or(NullValue::Truth, NullValue::Value);
        cfg.beta = match self.beta {
            BetaArg::CaseDefault => BetaSpec::CaseDefault,
            BetaArg::Zero => BetaSpec::Zero,
            BetaArg::Uniform => BetaSpec::UniformEntries,
        };
        cfg.sigma2 = self.sigma2;
        cfg.alternative = self.alternative.map(|a| {
            let kind = match a {
                AlternativeArg::Signal => AlternativeKind::Signal,
                AlternativeArg::ErrorVariance => AlternativeKind::ErrorVariance,
                AlternativeArg::Difference => AlternativeKind::Difference,
            };
            Alternative {
                kind,
                deltas: self.deltas.clone().unwrap_or_else(|| kind.default_grid()),
            }
        });
        cfg.theta = self.theta;
        cfg.n2 = self.n2;
        cfg.center = !self.no_center;
        cfg
    }
}

fn cell_label(cfg: &SimConfig) -> String {
    format!("case {} n {} p {}", cfg.case.label(), cfg.n, cfg.p)
}

fn simulation_table(summary: &SimSummary) -> (Table, Table) {
    let mut main = Table::new(
        "simulation",
        &[
            "delta",
            "replications",
            "errors",
            "flagged",
            "rejection_rate",
            "one_sided_rejection_rate",
            "ks_statistic",
            "ks_p_value",
            "estimate_mean",
            "estimate_std_error",
        ],
    );
    let mut coverage = Table::new("coverage", &["delta", "target", "coverage", "mean_length"]);
    for pt in &summary.points {
        let p = pt.primary.as_ref();
        let e = pt.primary_estimate.as_ref();
        main.push(vec![
            json!(pt.delta),
            json!(pt.replications),
            json!(pt.errors),
            json!(pt.flagged),
            json!(p.map(|s| s.rejection_rate)),
            json!(p.and_then(|s| s.one_sided_rejection_rate)),
            json!(p.map(|s| s.ks_statistic)),
            json!(p.map(|s| s.ks_p_value)),
            json!(e.map(|m| m.mean)),
            json!(e.map(|m| m.std_error)),
        ]);
        for (target, c) in &pt.coverage {
            coverage.push(vec![
                json!(pt.delta),
                to_value(target),
                json!(c.rate),
                json!(c.mean_length),
            ]);
        }
    }
    (main, coverage)
}

fn write_plot_data(dir: &std::path::Path, qq: &str, power: Option<&str>) -> Result<()> {
    report::write_text(&dir.join("qq.csv"), &format!("{QQ_HEADER}{qq}"))?;
    if let Some(power) = power {
        report::write_text(&dir.join("power.csv"), &format!("{POWER_HEADER}{power}"))?;
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Option<String>> {
    let started = args.output.timestamps.then(now);
    let cfg = args.config();
    cfg.validate()?;
    let out = run_replications(&cfg)?;
    let mut report = Report::new("simulate", Some(cfg.seed), to_value(&cfg));
    let (main, coverage) = simulation_table(&out.summary);
    report.tables.push(main);
    report.tables.push(coverage);
    let label = cell_label(&cfg);
    report.add_simulation_warnings(&label, &out.summary);
    if let Some(dir) = &args.output.plot_data {
        let mut qq = String::new();
        let name = cfg.test.name();
        report::qq_from_records(
            &label,
            &out.records,
            |r| r.p_value.map(|p| (name.to_string(), p)).into_iter().collect(),
            &mut qq,
        );
        let mut power = String::new();
        report::power_rows(&label, name, &out.summary, &mut power);
        write_plot_data(dir, &qq, cfg.alternative.is_some().then_some(power.as_str()))?;
    }
    report.simulations.push(out.summary);
    finish(&mut report, &args.output, started)
}

const COVERAGE_TARGETS: [Target; 7] = [
    Target::RegionTwoSided,
    Target::RegionOneSided,
    Target::QuadNorm,
    Target::Sigma2,
    Target::Rho,
    Target::RhoConventional,
    Target::Eta,
];

const CALIBRATION_TESTS: [TestKind; 9] = [
    TestKind::QuadNorm,
    TestKind::Conventional,
    TestKind::Global,
    TestKind::ErrorVariance,
    TestKind::Rho,
    TestKind::RhoConventional,
    TestKind::Eta,
    TestKind::Linear,
    TestKind::TwoSampleEquality,
];

fn cmd_reproduce(args: &ReproduceArgs) -> Result<Option<String>> {
    let started = args.output.timestamps.then(now);
    let reps = args.reps.unwrap_or(args.table.default_reps());
    let mut cells = Vec::new();
    for &n in &args.n {
        let ps = args.p.clone().unwrap_or_else(|| dimension_grid(n));
        for &p in &ps {
            for &case in &args.case {
                cells.push((case, n, p));
            }
        }
    }
    let mut config = to_value(args);
    config["reps"] = json!(reps);
    config["case"] = json!(args.case.iter().map(|c| c.label()).collect::<Vec<_>>());
    let mut report = Report::new("reproduce", Some(args.seed), config);
    let mut qq = String::new();
    let mut power = String::new();

    let base = |case: Case, n: usize, p: usize| {
        let mut cfg = SimConfig::new(case, n, p);
        cfg.reps = reps;
        cfg.seed = args.seed;
        cfg.alpha = args.alpha;
        cfg
    };

    match args.table {
        TableArg::Coverage => {
            let mut columns = vec!["case", "n", "p"];
            let names: Vec<String> = COVERAGE_TARGETS
                .iter()
                .map(|t| to_value(t).as_str().unwrap_or("").to_string())
                .collect();
            columns.extend(names.iter().map(|s| s.as_str()));
            let mut table = Table::new("coverage", &columns);
            for &(case, n, p) in &cells {
                let cfg = base(case, n, p);
                cfg.validate()?;
                let out = run_replications(&cfg)?;
                let pt = &out.summary.points[0];
                let mut row = vec![json!(case.label()), json!(n), json!(p)];
                row.extend(
                    COVERAGE_TARGETS
                        .iter()
                        .map(|t| json!(pt.coverage.get(t).map(|c| c.rate))),
                );
                table.push(row);
                report.add_simulation_warnings(&cell_label(&cfg), &out.summary);
            }
            report.tables.push(table);
        }
        TableArg::Calibration => {
            let mut columns = vec!["case", "n", "p"];
            let names: Vec<String> = CALIBRATION_TESTS.iter().map(|k| k.name().to_string()).collect();
            columns.extend(names.iter().map(|s| s.as_str()));
            let mut ks = Table::new("calibration-ks-p-value", &columns);
            let mut rates = Table::new("calibration-rejection-rate", &columns);
            for &(case, n, p) in &cells {
                let mut cfg = base(case, n, p);
                cfg.test = TestKind::TwoSampleEquality;
                cfg.validate()?;
                let out = run_replications(&cfg)?;
                let pt = &out.summary.points[0];
                let head = vec![json!(case.label()), json!(n), json!(p)];
                let mut ks_row = head.clone();
                let mut rate_row = head;
                for k in CALIBRATION_TESTS {
                    let s = pt.tests.get(&k);
                    ks_row.push(json!(s.map(|s| s.ks_p_value)));
                    rate_row.push(json!(s.map(|s| s.rejection_rate)));
                }
                ks.push(ks_row);
                rates.push(rate_row);
                let label = cell_label(&cfg);
                report.add_simulation_warnings(&label, &out.summary);
                if args.output.plot_data.is_some() {
                    report::qq_from_records(
                        &label,
                        &out.records,
                        |r| {
                            r.tests
                                .iter()
                                .map(|(k, v)| (k.name().to_string(), v.two_sided))
                                .collect()
                        },
                        &mut qq,
                    );
                }
            }
            report.tables.push(ks);
            report.tables.push(rates);
        }
        TableArg::Power => {
            let mut table = Table::new(
                "power",
                &[
                    "case",
                    "n",
                    "p",
                    "test",
                    "delta",
                    "rejection_rate",
                    "one_sided_rejection_rate",
                ],
            );
            let plans = [
                (AlternativeKind::Signal, TestKind::Signal),
                (AlternativeKind::ErrorVariance, TestKind::ErrorVariance),
                (AlternativeKind::Difference, TestKind::TwoSampleEquality),
            ];
            for &(case, n, p) in &cells {
                for (kind, test) in plans {
                    let mut cfg = base(case, n, p);
                    cfg.test = test;
                    let mut deltas = kind.default_grid();
                    if kind == AlternativeKind::ErrorVariance {
                        // Hold the null at the base variance while the truth moves.
                        cfg.null = NullValue::Value(cfg.sigma2);
                        // σ² + δ/√n must stay positive; small n cannot reach the lower grid end.
                        let floor = -cfg.sigma2 * (n as f64).sqrt();
                        let kept = deltas.len();
                        deltas.retain(|d| *d > floor);
                        if deltas.len() < kept {
                            report.warnings.push(format!(
                                "{}: dropped {} error-variance grid values at or below {floor:.3} (nonpositive variance)",
                                cell_label(&cfg),
                                kept - deltas.len()
                            ));
                        }
                    }
                    cfg.alternative = Some(Alternative { kind, deltas });
                    cfg.validate()?;
                    let out = run_replications(&cfg)?;
                    for pt in &out.summary.points {
                        let s = pt.primary.as_ref();
                        table.push(vec![
                            json!(case.label()),
                            json!(n),
                            json!(p),
                            json!(test.name()),
                            json!(pt.delta),
                            json!(s.map(|s| s.rejection_rate)),
                            json!(s.and_then(|s| s.one_sided_rejection_rate)),
                        ]);
                    }
                    let label = cell_label(&cfg);
                    report.add_simulation_warnings(&label, &out.summary);
                    report::power_rows(&label, test.name(), &out.summary, &mut power);
                }
            }
            report.tables.push(table);
        }
    }
    if let Some(dir) = &args.output.plot_data {
        let power = (args.table == TableArg::Power).then_some(power.as_str());
        write_plot_data(dir, &qq, power)?;
    }
    finish(&mut report, &args.output, started)
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

/// Execute a parsed command; returns the report text when it goes to standard output.
pub fn execute(cli: &Cli) -> Result<Option<String>> {
    match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::TwoSample(a) => cmd_two_sample(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

/// Parse arguments, run, print, and return the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(Some(text)) => {
            print!("{text}");
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
