//! Replication engine: per-replication evaluation and deterministic aggregation.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cases::{Draw, GridPoint, Scenario, Truth};
use super::config::{NullValue, SimConfig, TestKind};
use super::ks::ks_uniformity;
use crate::error::{Error, Result};
use crate::estimators::{nu4_hat, quad_norm_estimate, snr_estimates, zeta_n2_hat, zeta_star2_hat, Flag};
use crate::linalg::ModelFit;
use crate::onesample::{
    confidence_region_contains, linear_functional_inference, test_conventional, test_error_variance, test_eta,
    test_global, test_quad_norm, test_rho, test_signal_detection, InferenceResult, Method, Side,
};
use crate::twosample::{
    diff_norm_estimate, sigma2_diff_hat, test_coheritability, test_equality, theta_hat, TwoSampleFit,
};

/// Parameter whose interval (or region) coverage is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// One-sided region for `β₀`.
    RegionOneSided,
    /// Two-sided region for `β₀`.
    RegionTwoSided,
    QuadNorm,
    QuadNormConventional,
    Sigma2,
    Rho,
    RhoConventional,
    Eta,
    Linear,
    Theta,
    ThetaConventional,
    Diff,
}

/// Recorded per-replication estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    QuadNorm,
    RawNormSq,
    ZetaN2,
    ZetaStar2,
    Sigma2,
    Nu4,
    TraceInv,
    Eta,
    Rho,
    SigmaRho2,
    SigmaEta2,
    Diff,
    SigmaDiff2,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub two_sided: f64,
    pub one_sided: Option<f64>,
}

impl From<&InferenceResult> for PValue {
    fn from(r: &InferenceResult) -> Self {
        PValue {
            two_sided: r.p_value,
            one_sided: r.one_sided_p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep_index: u64,
    pub delta: f64,
    /// Primary test, evaluated at the configured null.
    pub p_value: Option<f64>,
    pub one_sided_p: Option<f64>,
    pub estimate: Option<f64>,
    pub std_error: Option<f64>,
    /// Every applicable test evaluated at its true parameter value.
    pub tests: BTreeMap<TestKind, PValue>,
    pub covered: BTreeMap<Target, bool>,
    pub ci_length: BTreeMap<Target, f64>,
    pub estimates: BTreeMap<Quantity, f64>,
    /// Diagnostic flags of the primary test.
    pub flags: BTreeSet<Flag>,
    pub error: Option<String>,
}

impl ReplicationRecord {
    fn empty(rep_index: u64, delta: f64) -> Self {
        ReplicationRecord {
            rep_index,
            delta,
            p_value: None,
            one_sided_p: None,
            estimate: None,
            std_error: None,
            tests: BTreeMap::new(),
            covered: BTreeMap::new(),
            ci_length: BTreeMap::new(),
            estimates: BTreeMap::new(),
            flags: BTreeSet::new(),
            error: None,
        }
    }

    fn failed(rep_index: u64, delta: f64, err: &Error) -> Self {
        let mut r = ReplicationRecord::empty(rep_index, delta);
        r.error = Some(err.to_string());
        r
    }

    fn interval(&mut self, target: Target, result: &InferenceResult, value: Option<f64>) {
        if let Some(v) = value {
            self.covered.insert(target, result.covers(v));
            self.ci_length.insert(target, result.ci_high - result.ci_low);
        }
    }
}

fn in_open_unit(v: Option<f64>) -> Option<f64> {
    v.filter(|x| *x > 0.0 && *x < 1.0)
}

/// Evaluate the one-sample quantities on `fit` against `truth`.
fn one_sample(rec: &mut ReplicationRecord, fit: &ModelFit, truth: &Truth, alpha: f64) {
    let beta0 = DVector::from_column_slice(&truth.beta0);
    let norm0 = beta0.norm();

    rec.estimates.insert(Quantity::QuadNorm, quad_norm_estimate(fit));
    rec.estimates.insert(Quantity::RawNormSq, fit.beta_hat.norm_squared());
    rec.estimates.insert(Quantity::ZetaN2, zeta_n2_hat(fit).value);
    rec.estimates.insert(Quantity::ZetaStar2, zeta_star2_hat(fit).value);
    rec.estimates.insert(Quantity::Sigma2, fit.sigma2_hat);
    rec.estimates.insert(Quantity::Nu4, nu4_hat(fit, &fit.residuals).value);
    rec.estimates.insert(Quantity::TraceInv, fit.trace_inv());
    if let Ok(snr) = snr_estimates(fit) {
        rec.estimates.insert(Quantity::Eta, snr.eta_hat);
        rec.estimates.insert(Quantity::Rho, snr.rho_hat);
        rec.estimates.insert(Quantity::SigmaRho2, snr.sigma2_rho);
        rec.estimates.insert(Quantity::SigmaEta2, snr.sigma2_eta);
    }

    for side in [Side::One, Side::Two] {
        if let Ok(inside) = confidence_region_contains(fit, &beta0, alpha, side) {
            let target = match side {
                Side::One => Target::RegionOneSided,
                Side::Two => Target::RegionTwoSided,
            };
            rec.covered.insert(target, inside);
        }
    }
    if let Ok(r) = test_quad_norm(fit, norm0, alpha) {
        rec.tests.insert(TestKind::QuadNorm, (&r).into());
        rec.interval(Target::QuadNorm, &r, Some(norm0 * norm0));
    }
    if let Ok(r) = test_conventional(fit, norm0, alpha) {
        rec.tests.insert(TestKind::Conventional, (&r).into());
        rec.interval(Target::QuadNormConventional, &r, Some(norm0 * norm0));
    }
    if let Ok(r) = test_signal_detection(fit, alpha) {
        rec.tests.insert(TestKind::Signal, (&r).into());
    }
    if let Ok(r) = test_global(fit, &beta0, alpha) {
        rec.tests.insert(TestKind::Global, (&r).into());
    }
    if let Ok(r) = test_error_variance(fit, &fit.residuals, truth.sigma2, alpha) {
        rec.tests.insert(TestKind::ErrorVariance, (&r).into());
        rec.interval(Target::Sigma2, &r, Some(truth.sigma2));
    }
    for (method, kind, target) in [
        (Method::Proposed, TestKind::Rho, Target::Rho),
        (Method::Conventional, TestKind::RhoConventional, Target::RhoConventional),
    ] {
        // The interval does not depend on the null, so a placeholder serves when ρ₀ is 0.
        let null = in_open_unit(truth.rho0);
        if let Ok(r) = test_rho(fit, null.unwrap_or(0.5), alpha, method) {
            if null.is_some() {
                rec.tests.insert(kind, (&r).into());
            }
            rec.interval(target, &r, truth.rho0);
        }
    }
    if let Some(eta0) = truth.eta0 {
        if let Ok(r) = test_eta(fit, eta0, alpha) {
            rec.tests.insert(TestKind::Eta, (&r).into());
            rec.interval(Target::Eta, &r, Some(eta0));
        }
    }
    let e1 = unit(fit.p(), 0);
    if let Ok(r) = linear_functional_inference(fit, &e1, beta0[0], alpha) {
        rec.tests.insert(TestKind::Linear, (&r).into());
        rec.interval(Target::Linear, &r, Some(beta0[0]));
    }
}

fn two_sample(rec: &mut ReplicationRecord, ts: &TwoSampleFit, truth: &Truth, alpha: f64) {
    rec.estimates.insert(Quantity::Diff, diff_norm_estimate(ts));
    rec.estimates.insert(Quantity::SigmaDiff2, sigma2_diff_hat(ts).value);
    if let Ok(t) = theta_hat(ts) {
        rec.estimates.insert(Quantity::Theta, t);
    }
    if let Ok(r) = test_equality(ts, alpha) {
        rec.tests.insert(TestKind::TwoSampleEquality, (&r).into());
        rec.interval(Target::Diff, &r, truth.diff0);
    }
    let theta0 = truth.theta0.filter(|t| *t > -1.0 && *t < 1.0);
    for (method, kind, target) in [
        (Method::Proposed, TestKind::Coheritability, Target::Theta),
        (
            Method::Conventional,
            TestKind::CoheritabilityConventional,
            Target::ThetaConventional,
        ),
    ] {
        if let Ok(r) = test_coheritability(ts, theta0.unwrap_or(0.0), alpha, method) {
            if theta0.is_some() {
                rec.tests.insert(kind, (&r).into());
            }
            rec.interval(target, &r, truth.theta0);
        }
    }
}

fn unit(p: usize, j: usize) -> DVector<f64> {
    let mut e = DVector::zeros(p);
    e[j] = 1.0;
    e
}

/// The primary test at the configured null.
fn primary(cfg: &SimConfig, fit: &ModelFit, ts: Option<&TwoSampleFit>, truth: &Truth) -> Result<InferenceResult> {
    let alpha = cfg.alpha;
    let fixed = match cfg.null {
        NullValue::Truth => None,
        NullValue::Value(v) => Some(v),
    };
    let missing = |what: &str| Error::Config(format!("the {what} is undefined for this design"));
    let beta0 = DVector::from_column_slice(&truth.beta0);
    match cfg.test {
        TestKind::QuadNorm => test_quad_norm(fit, fixed.unwrap_or_else(|| beta0.norm()), alpha),
        TestKind::Conventional => test_conventional(fit, fixed.unwrap_or_else(|| beta0.norm()), alpha),
        TestKind::Signal => test_signal_detection(fit, alpha),
        TestKind::Global => {
            let null = match fixed {
                Some(v) => DVector::from_element(fit.p(), v),
                None => beta0,
            };
            test_global(fit, &null, alpha)
        }
        TestKind::ErrorVariance => test_error_variance(fit, &fit.residuals, fixed.unwrap_or(truth.sigma2), alpha),
        TestKind::Rho | TestKind::RhoConventional => {
            let null = fixed
                .or(truth.rho0)
                .ok_or_else(|| missing("fraction of variance explained"))?;
            let method = if cfg.test == TestKind::Rho {
                Method::Proposed
            } else {
                Method::Conventional
            };
            test_rho(fit, null, alpha, method)
        }
        TestKind::Eta => {
            let null = fixed.or(truth.eta0).ok_or_else(|| missing("signal strength"))?;
            test_eta(fit, null, alpha)
        }
        TestKind::Linear => linear_functional_inference(fit, &unit(fit.p(), 0), fixed.unwrap_or(beta0[0]), alpha),
        TestKind::TwoSampleEquality => test_equality(ts.expect("two-sample fit"), alpha),
        TestKind::Coheritability | TestKind::CoheritabilityConventional => {
            let null = fixed.or(truth.theta0).ok_or_else(|| missing("angle"))?;
            let method = if cfg.test == TestKind::Coheritability {
                Method::Proposed
            } else {
                Method::Conventional
            };
            test_coheritability(ts.expect("two-sample fit"), null, alpha, method)
        }
    }
}

fn evaluate(
    scenario: &Scenario,
    first: &Draw,
    second: Option<&Draw>,
    point: &GridPoint,
    rep: u64,
) -> ReplicationRecord {
    let cfg = scenario.config();
    let attempt = || -> Result<ReplicationRecord> {
        let mut rec = ReplicationRecord::empty(rep, point.delta);
        let fit = first.fit(&point.beta, point.sigma2.sqrt(), cfg.center)?;
        one_sample(&mut rec, &fit, &point.truth, cfg.alpha);
        let ts = match (second, &point.gamma) {
            (Some(draw), Some(gamma)) => {
                let fit_b = draw.fit(gamma, cfg.sigma2.sqrt(), cfg.center)?;
                let ts = TwoSampleFit::new(fit.clone(), fit_b)?;
                two_sample(&mut rec, &ts, &point.truth, cfg.alpha);
                Some(ts)
            }
            _ => None,
        };
        let r = primary(cfg, &fit, ts.as_ref(), &point.truth)?;
        rec.p_value = Some(r.p_value);
        rec.one_sided_p = r.one_sided_p;
        rec.estimate = Some(r.estimate);
        rec.std_error = Some(r.std_error);
        rec.flags = r.flags;
        Ok(rec)
    };
    attempt().unwrap_or_else(|e| ReplicationRecord::failed(rep, point.delta, &e))
}

/// All grid points of one replication.
pub fn replicate(scenario: &Scenario, grid: &[GridPoint], rep: u64) -> Vec<ReplicationRecord> {
    match scenario.draw(rep) {
        Ok((first, second)) => grid
            .iter()
            .map(|g| evaluate(scenario, &first, second.as_ref(), g, rep))
            .collect(),
        Err(e) => grid
            .iter()
            .map(|g| ReplicationRecord::failed(rep, g.delta, &e))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    /// Sample variance (divisor `count − 1`; zero for a single value).
    pub variance: f64,
    /// Monte Carlo standard error of the mean.
    pub std_error: f64,
    pub median: f64,
}

impl Moments {
    pub fn of(values: &[f64]) -> Option<Moments> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Some(Moments {
            count: values.len(),
            mean,
            variance,
            std_error: (variance / n).sqrt(),
            median,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub count: usize,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub rejection_rate: f64,
    pub one_sided_rejection_rate: Option<f64>,
}

impl TestSummary {
    fn of(p: &[f64], one_sided: &[f64], alpha: f64) -> Option<TestSummary> {
        let (d, ks_p) = ks_uniformity(p).ok()?;
        let rate = |xs: &[f64]| xs.iter().filter(|v| **v < alpha).count() as f64 / xs.len() as f64;
        Some(TestSummary {
            count: p.len(),
            ks_statistic: d,
            ks_p_value: ks_p,
            rejection_rate: rate(p),
            one_sided_rejection_rate: (one_sided.len() == p.len()).then(|| rate(one_sided)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub count: usize,
    pub rate: f64,
    pub mean_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub delta: f64,
    pub truth: Truth,
    pub replications: usize,
    pub errors: usize,
    pub flagged: usize,
    pub primary: Option<TestSummary>,
    pub primary_estimate: Option<Moments>,
    pub tests: BTreeMap<TestKind, TestSummary>,
    pub coverage: BTreeMap<Target, CoverageSummary>,
    pub moments: BTreeMap<Quantity, Moments>,
    /// Distinct error messages and their counts.
    pub error_messages: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub config: SimConfig,
    pub points: Vec<PointSummary>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub summary: SimSummary,
    /// Replication-major, grid-minor.
    pub records: Vec<ReplicationRecord>,
}

fn summarize_point(point: &GridPoint, records: &[&ReplicationRecord], alpha: f64) -> PointSummary {
    let ok: Vec<&ReplicationRecord> = records.iter().copied().filter(|r| r.error.is_none()).collect();
    let mut error_messages = BTreeMap::new();
    for r in records {
        if let Some(e) = &r.error {
            *error_messages.entry(e.clone()).or_insert(0) += 1;
        }
    }

    let primary_p: Vec<f64> = ok.iter().filter_map(|r| r.p_value).collect();
    let primary_one: Vec<f64> = ok.iter().filter_map(|r| r.one_sided_p).collect();
    let primary_est: Vec<f64> = ok.iter().filter_map(|r| r.estimate).collect();

    let mut test_p: BTreeMap<TestKind, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut covered: BTreeMap<Target, (usize, usize, Vec<f64>)> = BTreeMap::new();
    let mut quantities: BTreeMap<Quantity, Vec<f64>> = BTreeMap::new();
    for r in &ok {
        for (k, pv) in &r.tests {
            let e = test_p.entry(*k).or_default();
            e.0.push(pv.two_sided);
            if let Some(o) = pv.one_sided {
                e.1.push(o);
            }
        }
        for (t, hit) in &r.covered {
            let e = covered.entry(*t).or_default();
            e.0 += *hit as usize;
            e.1 += 1;
            if let Some(len) = r.ci_length.get(t) {
                e.2.push(*len);
            }
        }
        for (q, v) in &r.estimates {
            quantities.entry(*q).or_default().push(*v);
        }
    }

    PointSummary {
        delta: point.delta,
        truth: point.truth.clone(),
        replications: ok.len(),
        errors: records.len() - ok.len(),
        flagged: ok.iter().filter(|r| !r.flags.is_empty()).count(),
        primary: TestSummary::of(&primary_p, &primary_one, alpha),
        primary_estimate: Moments::of(&primary_est),
        tests: test_p
            .into_iter()
            .filter_map(|(k, (p, o))| TestSummary::of(&p, &o, alpha).map(|s| (k, s)))
            .collect(),
        coverage: covered
            .into_iter()
            .map(|(t, (hits, count, lengths))| {
                let mean_length = (!lengths.is_empty()).then(|| lengths.iter().sum::<f64>() / lengths.len() as f64);
                (
                    t,
                    CoverageSummary {
                        count,
                        rate: hits as f64 / count as f64,
                        mean_length,
                    },
                )
            })
            .collect(),
        moments: quantities
            .into_iter()
            .filter_map(|(q, v)| Moments::of(&v).map(|m| (q, m)))
            .collect(),
        error_messages,
    }
}

/// Run every replication of `cfg` and aggregate per grid point.
///
/// Records are computed in parallel but collected in replication order and
/// aggregated sequentially, so the output is independent of thread count.
pub fn run_replications(cfg: &SimConfig) -> Result<SimOutput> {
    let scenario = Scenario::new(cfg)?;
    let grid = scenario.grid();
    let records: Vec<ReplicationRecord> = (0..cfg.reps as u64)
        .into_par_iter()
        .map(|rep| replicate(&scenario, &grid, rep))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let points = grid
        .iter()
        .enumerate()
        .map(|(i, point)| {
            let at_point: Vec<&ReplicationRecord> = records.iter().skip(i).step_by(grid.len()).collect();
            summarize_point(point, &at_point, cfg.alpha)
        })
        .collect();
    Ok(SimOutput {
        summary: SimSummary {
            config: cfg.clone(),
            points,
        },
        records,
    })
}
