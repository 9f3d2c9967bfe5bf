//! One-sample test statistics, confidence intervals and regions.

use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    conventional_rho, nu4_hat, quad_norm_estimate, snr_estimates, zeta0_2_hat, zeta_eps2_hat, zeta_n2_hat,
    zeta_star2_hat, Flag,
};
use crate::linalg::ModelFit;
use crate::normal::{normal_cdf, normal_quantile, normal_sf, two_sided_p};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub estimate: f64,
    pub null_value: f64,
    pub std_error: f64,
    pub z: f64,
    /// Two-sided `2Φ(−|z|)`.
    pub p_value: f64,
    /// Present when the hypothesis has a natural direction.
    pub one_sided_p: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Interval endpoints before clamping to the parameter space.
    pub raw_ci_low: f64,
    pub raw_ci_high: f64,
    pub alpha: f64,
    pub flags: BTreeSet<Flag>,
}

/// Direction of a one-sided alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Upper,
    Lower,
}

pub(crate) struct TestSetup {
    pub estimate: f64,
    pub null_value: f64,
    pub std_error: f64,
    pub alpha: f64,
    pub tail: Option<Tail>,
    pub bounds: Option<(f64, f64)>,
    pub flags: BTreeSet<Flag>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")))
    }
}

impl InferenceResult {
    pub(crate) fn build(setup: TestSetup) -> Result<Self> {
        check_alpha(setup.alpha)?;
        let TestSetup {
            estimate,
            null_value,
            std_error,
            alpha,
            tail,
            bounds,
            mut flags,
        } = setup;
        let z = (estimate - null_value) / std_error;
        if !z.is_finite() {
            return Err(Error::DegenerateVariance("test statistic is not finite"));
        }
        let half = normal_quantile(1.0 - alpha / 2.0)? * std_error;
        let (raw_lo, raw_hi) = (estimate - half, estimate + half);
        let (mut lo, mut hi) = (raw_lo, raw_hi);
        if let Some((min, max)) = bounds {
            lo = lo.clamp(min, max);
            hi = hi.clamp(min, max);
            if lo != raw_lo || hi != raw_hi {
                flags.insert(Flag::IntervalClamped);
            }
        }
        Ok(InferenceResult {
            estimate,
            null_value,
            std_error,
            z,
            p_value: two_sided_p(z),
            one_sided_p: tail.map(|t| match t {
                Tail::Upper => normal_sf(z),
                Tail::Lower => normal_cdf(z),
            }),
            ci_low: lo,
            ci_high: hi,
            raw_ci_low: raw_lo,
            raw_ci_high: raw_hi,
            alpha,
            flags,
        })
    }

    pub fn rejects(&self) -> bool {
        self.p_value < self.alpha
    }

    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

fn require_noise(fit: &ModelFit) -> Result<()> {
    if fit.sigma2_hat > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateVariance("residual variance estimate is zero"))
    }
}

/// Bias-corrected test of `‖β₀‖² = c₀²`.
pub fn test_quad_norm(fit: &ModelFit, c0: f64, alpha: f64) -> Result<InferenceResult> {
    if !(c0 >= 0.0) {
        return Err(Error::Domain(format!("null norm must be nonnegative, got {c0}")));
    }
    require_noise(fit)?;
    let zeta = zeta_n2_hat(fit);
    let mut flags = BTreeSet::new();
    zeta.note(Flag::ZetaNFloored, &mut flags);
    InferenceResult::build(TestSetup {
        estimate: quad_norm_estimate(fit),
        null_value: c0 * c0,
        std_error: zeta.value.sqrt(),
        alpha,
        tail: None,
        bounds: None,
        flags,
    })
}

/// Uncorrected test built on `‖β̂‖²` and `ζ̂₀`.
pub fn test_conventional(fit: &ModelFit, c0: f64, alpha: f64) -> Result<InferenceResult> {
    if !(c0 >= 0.0) {
        return Err(Error::Domain(format!("null norm must be nonnegative, got {c0}")));
    }
    let zeta0 = zeta0_2_hat(fit);
    if !(zeta0 > 0.0) {
        return Err(Error::DegenerateVariance("conventional variance is zero"));
    }
    InferenceResult::build(TestSetup {
        estimate: fit.beta_hat.norm_squared(),
        null_value: c0 * c0,
        std_error: zeta0.sqrt(),
        alpha,
        tail: None,
        bounds: None,
        flags: BTreeSet::new(),
    })
}

fn star_test(fit: &ModelFit, estimate: f64, alpha: f64) -> Result<InferenceResult> {
    require_noise(fit)?;
    let zeta = zeta_star2_hat(fit);
    let mut flags = BTreeSet::new();
    zeta.note(Flag::ZetaStarFloored, &mut flags);
    InferenceResult::build(TestSetup {
        estimate,
        null_value: 0.0,
        std_error: zeta.value.sqrt(),
        alpha,
        tail: Some(Tail::Upper),
        bounds: None,
        flags,
    })
}

/// Test of `β₀ = 0` standardized by `ζ̂✱`.
pub fn test_signal_detection(fit: &ModelFit, alpha: f64) -> Result<InferenceResult> {
    star_test(fit, quad_norm_estimate(fit), alpha)
}

fn global_numerator(fit: &ModelFit, beta_null: &DVector<f64>) -> Result<f64> {
    if beta_null.len() != fit.p() {
        return Err(Error::Dimension(format!(
            "null coefficient vector has length {} but p={}",
            beta_null.len(),
            fit.p()
        )));
    }
    Ok((&fit.beta_hat - beta_null).norm_squared() - fit.trace_inv() * fit.sigma2_hat)
}

/// Test of `β₀ = β_null`; the estimate is the corrected `‖β₀ − β_null‖²`.
pub fn test_global(fit: &ModelFit, beta_null: &DVector<f64>, alpha: f64) -> Result<InferenceResult> {
    let numerator = global_numerator(fit, beta_null)?;
    star_test(fit, numerator, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    One,
    Two,
}

/// Membership of `beta` in the one- or two-sided confidence region for `β₀`.
pub fn confidence_region_contains(fit: &ModelFit, beta: &DVector<f64>, alpha: f64, side: Side) -> Result<bool> {
    check_alpha(alpha)?;
    let numerator = global_numerator(fit, beta)?;
    let zeta = zeta_star2_hat(fit).value.sqrt();
    Ok(match side {
        Side::Two => numerator.abs() <= normal_quantile(1.0 - alpha / 2.0)? * zeta,
        Side::One => numerator <= normal_quantile(1.0 - alpha)? * zeta,
    })
}

pub fn test_error_variance(
    fit: &ModelFit,
    residuals: &DVector<f64>,
    sigma2_null: f64,
    alpha: f64,
) -> Result<InferenceResult> {
    if !(sigma2_null > 0.0) {
        return Err(Error::Domain(format!(
            "null variance must be positive, got {sigma2_null}"
        )));
    }
    if residuals.len() != fit.n() {
        return Err(Error::Dimension(format!(
            "{} residuals for n={}",
            residuals.len(),
            fit.n()
        )));
    }
    let mut flags = BTreeSet::new();
    let nu4 = nu4_hat(fit, residuals);
    nu4.note(Flag::Nu4Floored, &mut flags);
    let zeta = zeta_eps2_hat(fit, nu4.value);
    zeta.note(Flag::ZetaEpsFloored, &mut flags);
    InferenceResult::build(TestSetup {
        estimate: fit.sigma2_hat,
        null_value: sigma2_null,
        std_error: zeta.value.sqrt(),
        alpha,
        tail: None,
        bounds: Some((0.0, f64::INFINITY)),
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Proposed,
    Conventional,
}

/// Inference on the fraction of variance explained. The one-sided p-value
/// is for the alternative `ρ₀ < ρ_null`.
pub fn test_rho(fit: &ModelFit, rho_null: f64, alpha: f64, method: Method) -> Result<InferenceResult> {
    if !(rho_null > 0.0 && rho_null < 1.0) {
        return Err(Error::Domain(format!("null rho must lie in (0,1), got {rho_null}")));
    }
    let mut flags = BTreeSet::new();
    let (estimate, variance) = match method {
        Method::Proposed => {
            let snr = snr_estimates(fit)?;
            flags.extend(snr.floored.iter().filter(|f| **f != Flag::SigmaEtaFloored));
            (snr.rho_hat, snr.sigma2_rho)
        }
        Method::Conventional => {
            let (rho, var) = conventional_rho(fit)?;
            var.note(Flag::SigmaRhoConventionalFloored, &mut flags);
            (rho, var.value)
        }
    };
    InferenceResult::build(TestSetup {
        estimate,
        null_value: rho_null,
        std_error: variance.sqrt(),
        alpha,
        tail: Some(Tail::Lower),
        bounds: Some((0.0, 1.0)),
        flags,
    })
}

/// Inference on the signal strength `η₀ = β₀ᵀΣβ₀`.
pub fn test_eta(fit: &ModelFit, eta_null: f64, alpha: f64) -> Result<InferenceResult> {
    let snr = snr_estimates(fit)?;
    let flags = snr
        .floored
        .iter()
        .copied()
        .filter(|f| *f != Flag::SigmaRhoFloored)
        .collect();
    InferenceResult::build(TestSetup {
        estimate: snr.eta_hat,
        null_value: eta_null,
        std_error: snr.sigma2_eta.sqrt(),
        alpha,
        tail: None,
        bounds: None,
        flags,
    })
}

/// Confidence interval `η̂ ± Φ⁻¹(1−α/2) σ̂_η` (tested against `η₀ = 0`).
pub fn ci_eta(fit: &ModelFit, alpha: f64) -> Result<InferenceResult> {
    test_eta(fit, 0.0, alpha)
}

/// Inference on `cᵀβ₀` with variance `σ̂² cᵀ(XᵀX)⁻¹c`.
pub fn linear_functional_inference(
    fit: &ModelFit,
    c: &DVector<f64>,
    null_value: f64,
    alpha: f64,
) -> Result<InferenceResult> {
    if c.len() != fit.p() {
        return Err(Error::Dimension(format!(
            "functional has length {} but p={}",
            c.len(),
            fit.p()
        )));
    }
    let variance = fit.sigma2_hat * fit.design().half_inv(c).norm_squared();
    if !(variance > 0.0) {
        return Err(Error::DegenerateVariance("linear functional has zero variance"));
    }
    InferenceResult::build(TestSetup {
        estimate: c.dot(&fit.beta_hat),
        null_value,
        std_error: variance.sqrt(),
        alpha,
        tail: None,
        bounds: None,
        flags: BTreeSet::new(),
    })
}

/// Large-sample power of a two-sided level-`alpha` z-test whose statistic is
/// shifted by `shift` standard errors under the alternative.
pub fn two_sided_power(shift: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let q = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(normal_sf(q - shift) + normal_cdf(-q - shift))
}

/// Power of the corrected quadratic-norm test at `‖β₀‖² = c₁²` against `c₀²`.
pub fn quad_norm_power(zeta_n: f64, c0: f64, c1: f64, alpha: f64) -> Result<f64> {
    two_sided_power((c1 * c1 - c0 * c0) / zeta_n, alpha)
}
