//! End-to-end acceptance criteria. Runs without the libtest harness so that
//! every criterion prints its own verdict line; exits nonzero if any fails.
//!
//! Monte Carlo runs share one fixed seed. Cells used by several criteria are
//! simulated once at the largest replication count they need; the engine draws
//! each replication from its own stream, so the first `r` records of a longer
//! run are exactly the records of an `r`-replication run.

use std::collections::BTreeMap;
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use quadinfer::linalg::{cross_trace, ols_fit, quad_form_inv, trace_inv_power, Dataset, Design, ModelFit};
use quadinfer::simulation::{
    run_replications, Alternative, AlternativeKind, BetaSpec, Case, Moments, NullValue, Quantity, ReplicationRecord,
    SimConfig, SimOutput, Target, TestKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEED: u64 = 1;
const BIN: &str = env!("CARGO_BIN_EXE_quadinfer");

struct Verdict {
    id: u32,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn criterion(id: u32, name: &str, body: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (pass, detail) = body();
    let seconds = start.elapsed().as_secs_f64();
    println!(
        "criterion {id:>2} {:<4} {name} ({seconds:.1}s): {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    Verdict {
        id,
        pass,
        detail,
        seconds,
    }
}

/// Collects named checks so a criterion reports every failing cell, not just the first.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    passed: usize,
}

impl Checks {
    fn check(&mut self, ok: bool, what: String) {
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(what);
        }
    }

    fn verdict(self) -> (bool, String) {
        if self.failed.is_empty() {
            (true, format!("{} checks", self.passed))
        } else {
            let total = self.passed + self.failed.len();
            (
                false,
                format!("{}/{} failed: {}", self.failed.len(), total, self.failed.join("; ")),
            )
        }
    }
}

fn simulate(cfg: &SimConfig) -> SimOutput {
    run_replications(cfg).unwrap_or_else(|e| panic!("simulation {:?} n={} p={}: {e}", cfg.case, cfg.n, cfg.p))
}

fn config(case: Case, n: usize, p: usize, reps: usize) -> SimConfig {
    let mut cfg = SimConfig::new(case, n, p);
    cfg.reps = reps;
    cfg.seed = SEED;
    cfg
}

/// Coverage of `target` over the first `reps` replications at the single grid point.
fn coverage(records: &[ReplicationRecord], target: Target, reps: u64) -> (f64, usize) {
    let hits: Vec<bool> = records
        .iter()
        .filter(|r| r.rep_index < reps)
        .filter_map(|r| r.covered.get(&target).copied())
        .collect();
    let rate = hits.iter().filter(|&&c| c).count() as f64 / hits.len() as f64;
    (rate, hits.len())
}

// ---------------------------------------------------------------- criterion 1

fn oracle_equivalence() -> (bool, String) {
    const REL: f64 = 1e-10;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = rng.gen_range(1..=8);
        let n = rng.gen_range(p + 2..=40);
        let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let fit = ols_fit(&Dataset::new(y.clone(), x.clone()).unwrap()).unwrap();
        let a = (x.transpose() * &x).try_inverse().unwrap();
        let a2 = &a * &a;
        let a3 = &a2 * &a;
        let rel = |got: f64, want: f64, scale: f64| (got - want).abs() / scale.abs().max(f64::MIN_POSITIVE);

        let beta = &a * x.transpose() * &y;
        worst = worst.max((&fit.beta_hat - &beta).amax() / beta.amax());
        let resid = &y - &x * &beta;
        let s2 = resid.norm_squared() / (n - p) as f64;
        worst = worst.max(rel(fit.sigma2_hat, s2, s2));
        for (k, m) in [(1, &a), (2, &a2), (3, &a3)] {
            worst = worst.max(rel(trace_inv_power(&fit, k).unwrap(), m.trace(), m.trace()));
        }
        let u = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        for (k, m) in [(1, &a), (2, &a2)] {
            let want = u.dot(&(m * &v));
            worst = worst.max(rel(
                quad_form_inv(&fit, &u, &v, k).unwrap(),
                want,
                u.norm() * (m * &v).norm(),
            ));
            let uu = u.dot(&(m * &u));
            worst = worst.max(rel(quad_form_inv(&fit, &u, &u, k).unwrap(), uu, uu));
        }
        let n2 = rng.gen_range(p + 2..=40);
        let x2 = DMatrix::from_fn(n2, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let other = ModelFit::new(Arc::new(Design::new(x2.clone()).unwrap()), &DVector::zeros(n2)).unwrap();
        let cross = (&a * (x2.transpose() * &x2).try_inverse().unwrap()).trace();
        worst = worst.max(rel(cross_trace(&fit, &other).unwrap(), cross, cross));
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst < REL && elapsed < 5.0;
    (
        pass,
        format!("max relative error {worst:.2e} (< {REL:e}), {elapsed:.2}s (< 5s)"),
    )
}

// ---------------------------------------------------------------- criterion 2

fn wishart_trace() -> (bool, String) {
    let start = Instant::now();
    let (n, p, draws) = (200, 50, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let total: f64 = (0..draws)
        .map(|_| {
            let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            Design::new(x).unwrap().trace_inv()
        })
        .sum();
    let mean = total / draws as f64;
    let want = p as f64 / (n - p - 1) as f64;
    let rel = (mean - want).abs() / want;
    let elapsed = start.elapsed().as_secs_f64();
    (
        rel < 0.01 && elapsed < 30.0,
        format!("mean tr = {mean:.5} vs {want:.5}, relative gap {rel:.4} (< 0.01), {elapsed:.1}s (< 30s)"),
    )
}

// ------------------------------------------------------- shared (400, p) grid

/// Null runs at n = 400 for every case and the coverage dimensions.
/// Dimensions 66, 100 and 160 run 2000 replications (calibration and bias
/// need them); coverage reads the first 1000.
struct Grid {
    cells: BTreeMap<(Case, usize), SimOutput>,
    seconds: BTreeMap<(Case, usize), f64>,
}

impl Grid {
    fn runtime(&self, cells: impl IntoIterator<Item = (Case, usize)>) -> f64 {
        cells.into_iter().map(|c| self.seconds[&c]).sum()
    }
}

const GRID_P: [usize; 4] = [4, 66, 100, 160];

fn null_grid() -> Grid {
    let mut cells = BTreeMap::new();
    let mut seconds = BTreeMap::new();
    for case in Case::ALL {
        for p in GRID_P {
            let reps = if p == 4 { 1000 } else { 2000 };
            let start = Instant::now();
            cells.insert((case, p), simulate(&config(case, 400, p, reps)));
            seconds.insert((case, p), start.elapsed().as_secs_f64());
        }
    }
    Grid { cells, seconds }
}

fn unbiasedness(grid: &Grid) -> (bool, String) {
    let mut checks = Checks::default();
    for case in Case::ALL {
        let point = &grid.cells[&(case, 100)].summary.points[0];
        let m = &point.moments[&Quantity::QuadNorm];
        let truth = point.truth.beta_norm2();
        let gap = (m.mean - truth).abs() / m.std_error;
        checks.check(
            gap <= 3.0 && m.count == 2000,
            format!(
                "case {}: mean {:.5} truth {:.5} gap {gap:.2} SE over {} reps",
                case.label(),
                m.mean,
                truth,
                m.count
            ),
        );
    }
    let runtime = grid.runtime(Case::ALL.map(|c| (c, 100)));
    checks.check(runtime < 120.0, format!("runtime {runtime:.1}s"));
    let (pass, detail) = checks.verdict();
    (pass, format!("{detail}; simulation {runtime:.1}s (< 120s)"))
}

fn zn_calibration(grid: &Grid) -> (bool, String) {
    let mut checks = Checks::default();
    let mut cells = Vec::new();
    for case in [Case::I, Case::II, Case::III] {
        for p in [66, 160] {
            let t = &grid.cells[&(case, p)].summary.points[0].tests[&TestKind::QuadNorm];
            cells.push(format!("{}/{p} {:.3}", case.label(), t.ks_p_value));
            checks.check(
                t.ks_p_value > 0.01 && t.count == 2000,
                format!("case {} p={p}: KS p {:.4} over {}", case.label(), t.ks_p_value, t.count),
            );
        }
    }
    let cases = [Case::I, Case::II, Case::III];
    let runtime = grid.runtime(cases.iter().flat_map(|&c| [(c, 66), (c, 160)]));
    checks.check(runtime < 180.0, format!("runtime {runtime:.1}s"));
    let (pass, detail) = checks.verdict();
    (
        pass,
        format!(
            "{detail}; KS p-values {}; simulation {runtime:.1}s (< 180s)",
            cells.join(", ")
        ),
    )
}

fn coverage_band(grid: &Grid, target: Target, cases: &[Case], low: f64, high: f64) -> Checks {
    let mut checks = Checks::default();
    for &case in cases {
        for p in GRID_P {
            let (rate, count) = coverage(&grid.cells[&(case, p)].records, target, 1000);
            checks.check(
                (low..=high).contains(&rate) && count == 1000,
                format!("case {} p={p}: {rate:.3} over {count}", case.label()),
            );
        }
    }
    checks
}

fn coverage_summary(grid: &Grid, target: Target, cases: &[Case]) -> String {
    let rates: Vec<f64> = cases
        .iter()
        .flat_map(|&c| GRID_P.map(|p| coverage(&grid.cells[&(c, p)].records, target, 1000).0))
        .collect();
    let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("range [{lo:.3}, {hi:.3}]")
}

fn region_coverage(grid: &Grid) -> (bool, String) {
    let (pass, detail) = coverage_band(grid, Target::RegionTwoSided, &Case::ALL, 0.93, 0.97).verdict();
    (
        pass,
        format!(
            "{detail}; {}",
            coverage_summary(grid, Target::RegionTwoSided, &Case::ALL)
        ),
    )
}

fn sigma2_coverage(grid: &Grid) -> (bool, String) {
    let (pass, detail) = coverage_band(grid, Target::Sigma2, &Case::ALL, 0.92, 0.97).verdict();
    (
        pass,
        format!("{detail}; {}", coverage_summary(grid, Target::Sigma2, &Case::ALL)),
    )
}

fn rho_coverage(grid: &Grid) -> (bool, String) {
    let cases = [Case::I, Case::II, Case::III];
    let mut checks = coverage_band(grid, Target::Rho, &cases, 0.92, 0.97);
    let mut conventional = Vec::new();
    for case in cases {
        let t = &grid.cells[&(case, 160)].summary.points[0].tests[&TestKind::RhoConventional];
        conventional.push(format!("{} {:.1e}", case.label(), t.ks_p_value));
        checks.check(
            t.ks_p_value < 0.01,
            format!(
                "case {} p=160: conventional KS p {:.4} shows no miscalibration",
                case.label(),
                t.ks_p_value
            ),
        );
    }
    let (pass, detail) = checks.verdict();
    (
        pass,
        format!(
            "{detail}; proposed {}; conventional KS p at p=160: {}",
            coverage_summary(grid, Target::Rho, &cases),
            conventional.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn z0_miscalibration() -> (bool, String) {
    let mut cfg = config(Case::I, 400, 160, 2000);
    cfg.test = TestKind::Conventional;
    cfg.beta = BetaSpec::UniformEntries;
    let out = simulate(&cfg);
    let t = out.summary.points[0].primary.as_ref().expect("primary summary");
    (
        t.ks_p_value < 1e-4,
        format!("KS p {:.2e} (< 1e-4) over {}", t.ks_p_value, t.count),
    )
}

// ---------------------------------------------------------------- criterion 9

/// Nondecreasing along `rates` except for at most one drop of at most 0.02.
fn monotone(rates: &[f64]) -> bool {
    let drops: Vec<f64> = rates.windows(2).map(|w| w[0] - w[1]).filter(|d| *d > 0.0).collect();
    drops.len() <= 1 && drops.iter().all(|d| *d <= 0.02)
}

fn power_curves() -> (bool, String) {
    let mut checks = Checks::default();
    let mut notes = Vec::new();
    let plans = [
        (AlternativeKind::Signal, TestKind::Signal),
        (AlternativeKind::ErrorVariance, TestKind::ErrorVariance),
    ];
    for case in Case::ALL {
        for (kind, test) in plans {
            let mut cfg = config(case, 400, 100, 500);
            cfg.test = test;
            if kind == AlternativeKind::ErrorVariance {
                cfg.null = NullValue::Value(cfg.sigma2);
            }
            let deltas = kind.default_grid();
            cfg.alternative = Some(Alternative {
                kind,
                deltas: deltas.clone(),
            });
            let out = simulate(&cfg);
            let rate: BTreeMap<i64, f64> = out
                .summary
                .points
                .iter()
                .map(|pt| {
                    (
                        (pt.delta * 2.0).round() as i64,
                        pt.primary.as_ref().expect("primary").rejection_rate,
                    )
                })
                .collect();
            let at = |d: f64| rate[&((d * 2.0).round() as i64)];
            let label = format!("case {} {}", case.label(), test.name());
            let size = at(0.0);
            checks.check((0.03..=0.08).contains(&size), format!("{label}: size {size:.3}"));
            // each side of zero separately, ordered by |δ|
            let mut sides = Vec::new();
            for sign in [1.0, -1.0] {
                let mut side: Vec<f64> = deltas.iter().copied().filter(|d| *d * sign >= 0.0).collect();
                side.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
                if side.len() > 1 {
                    sides.push(side);
                }
            }
            for side in &sides {
                let far = *side.last().unwrap();
                let rates: Vec<f64> = side.iter().map(|d| at(*d)).collect();
                checks.check(at(far) >= 0.9, format!("{label}: power {:.3} at delta {far}", at(far)));
                checks.check(
                    monotone(&rates),
                    format!("{label}: not monotone toward delta {far}: {rates:.3?}"),
                );
            }
            notes.push(format!("{label} size {size:.3}"));
        }
    }
    let (pass, detail) = checks.verdict();
    (pass, format!("{detail}; {}", notes.join(", ")))
}

// --------------------------------------------------------------- criterion 10

fn zeta_ratio() -> (bool, String) {
    let out = simulate(&config(Case::I, 800, 200, 2000));
    let point = &out.summary.points[0];
    let median = point.moments[&Quantity::ZetaN2].median;
    let empirical = point.moments[&Quantity::QuadNorm].variance;
    let ratio = median / empirical;
    (
        (ratio - 1.0).abs() <= 0.10,
        format!("median zeta_n^2 {median:.4e} / empirical variance {empirical:.4e} = {ratio:.4}"),
    )
}

// --------------------------------------------------------------- criterion 11

fn two_sample_null() -> (bool, String) {
    let mut checks = Checks::default();
    let mut cfg = config(Case::I, 400, 66, 2000);
    cfg.test = TestKind::TwoSampleEquality;
    let out = simulate(&cfg);
    let t = out.summary.points[0].primary.as_ref().expect("primary");
    checks.check(t.ks_p_value > 0.01, format!("equality KS p {:.4}", t.ks_p_value));
    let mut notes = vec![format!("equality KS p {:.3}", t.ks_p_value)];
    for theta in [0.0, 0.5] {
        let mut cfg = config(Case::I, 400, 66, 2000);
        cfg.test = TestKind::Coheritability;
        cfg.theta = Some(theta);
        let out = simulate(&cfg);
        let point = &out.summary.points[0];
        let m: &Moments = &point.moments[&Quantity::Theta];
        let truth = point.truth.theta0.expect("designed angle");
        let gap = (m.mean - truth).abs() / m.std_error;
        checks.check(gap <= 3.0, format!("theta {theta}: mean {:.4} gap {gap:.2} SE", m.mean));
        notes.push(format!("theta {theta}: mean {:.4} ({gap:.2} SE)", m.mean));
    }
    let (pass, detail) = checks.verdict();
    (pass, format!("{detail}; {}", notes.join(", ")))
}

// --------------------------------------------------------------- criterion 12

fn cli_determinism() -> (bool, String) {
    let invocations: [&[&str]; 3] = [
        &[
            "simulate", "--case", "II", "--n", "80", "--p", "20", "--reps", "200", "--seed", "7",
        ],
        &[
            "simulate",
            "--case",
            "I",
            "--n",
            "80",
            "--p",
            "10",
            "--reps",
            "100",
            "--seed",
            "3",
            "--test",
            "signal",
            "--alternative",
            "signal",
            "--deltas",
            "0,2,4",
        ],
        &[
            "reproduce",
            "--table",
            "calibration",
            "--n",
            "60",
            "--case",
            "I,III",
            "--reps",
            "100",
            "--seed",
            "5",
        ],
    ];
    let mut checks = Checks::default();
    for args in invocations {
        let outputs: Vec<Vec<u8>> = [1, 4, 1]
            .iter()
            .map(|threads| {
                let out = Command::new(BIN)
                    .env("RAYON_NUM_THREADS", threads.to_string())
                    .args(args)
                    .output()
                    .expect("run binary");
                assert!(
                    out.status.success(),
                    "{args:?}: {}",
                    String::from_utf8_lossy(&out.stderr)
                );
                out.stdout
            })
            .collect();
        let same = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
        checks.check(same, format!("{} differs across runs", args.join(" ")));
    }
    checks.verdict()
}

fn main() {
    let mut verdicts = vec![
        criterion(1, "oracle equivalence", oracle_equivalence),
        criterion(2, "Wishart mean trace", wishart_trace),
    ];

    let start = Instant::now();
    let grid = null_grid();
    println!(
        "shared null grid at n=400 simulated in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    verdicts.push(criterion(3, "unbiasedness of the corrected norm", || {
        unbiasedness(&grid)
    }));
    verdicts.push(criterion(4, "calibration of Z_n", || zn_calibration(&grid)));
    verdicts.push(criterion(5, "miscalibration of Z_0", z0_miscalibration));
    verdicts.push(criterion(6, "CR2 coverage", || region_coverage(&grid)));
    verdicts.push(criterion(7, "error-variance CI coverage", || sigma2_coverage(&grid)));
    verdicts.push(criterion(8, "rho CI coverage", || rho_coverage(&grid)));
    drop(grid);
    verdicts.push(criterion(9, "power curves", power_curves));
    verdicts.push(criterion(10, "zeta_n^2 ratio consistency", zeta_ratio));
    verdicts.push(criterion(11, "two-sample null", two_sample_null));
    verdicts.push(criterion(12, "CLI determinism", cli_determinism));

    let failed: Vec<&Verdict> = verdicts.iter().filter(|v| !v.pass).collect();
    let total: f64 = verdicts.iter().map(|v| v.seconds).sum();
    println!(
        "acceptance: {}/{} criteria passed ({total:.0}s)",
        verdicts.len() - failed.len(),
        verdicts.len()
    );
    if !failed.is_empty() {
        for v in &failed {
            eprintln!("criterion {} failed: {}", v.id, v.detail);
        }
        std::process::exit(1);
    }
}
