//! Two independent regressions sharing a coefficient dimension: equality of
//! the coefficient vectors and their normalized inner product.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{positive_or_floor, quad_norm_estimate, Flag, Floored};
use crate::linalg::{cross_trace, ModelFit};
use crate::normal::{normal_cdf, normal_quantile};
use crate::onesample::{InferenceResult, Method, Tail, TestSetup};

/// Fit `a` carries `(X, β̂, σ̂²_ε)`, fit `b` carries `(V, γ̂, σ̂²_δ)`.
#[derive(Debug, Clone)]
pub struct TwoSampleFit {
    pub fit_a: ModelFit,
    pub fit_b: ModelFit,
    /// `tr{(XᵀX)⁻¹(VᵀV)⁻¹}`
    pub cross_trace: f64,
}

impl TwoSampleFit {
    pub fn new(fit_a: ModelFit, fit_b: ModelFit) -> Result<Self> {
        let cross_trace = cross_trace(&fit_a, &fit_b)?;
        Ok(TwoSampleFit {
            fit_a,
            fit_b,
            cross_trace,
        })
    }

    pub fn swapped(&self) -> Self {
        TwoSampleFit {
            fit_a: self.fit_b.clone(),
            fit_b: self.fit_a.clone(),
            cross_trace: self.cross_trace,
        }
    }

    fn floor_scale(&self) -> (f64, usize) {
        (
            self.fit_a.sigma2_hat.max(self.fit_b.sigma2_hat),
            self.fit_a.n().max(self.fit_b.n()),
        )
    }
}

/// `2σ̂⁴{−tr(A²) + tr(A)²/(n−p)}` for one sample.
fn trace_correction(fit: &ModelFit) -> f64 {
    let s4 = fit.sigma2_hat * fit.sigma2_hat;
    let tr1 = fit.trace_inv();
    2.0 * s4 * (-fit.trace_inv2() + tr1 * tr1 / (fit.n() - fit.p()) as f64)
}

/// `‖β̂ − γ̂‖² − tr{(XᵀX)⁻¹}σ̂²_ε − tr{(VᵀV)⁻¹}σ̂²_δ`.
pub fn diff_norm_estimate(ts: &TwoSampleFit) -> f64 {
    let (a, b) = (&ts.fit_a, &ts.fit_b);
    (&a.beta_hat - &b.beta_hat).norm_squared() - a.trace_inv() * a.sigma2_hat - b.trace_inv() * b.sigma2_hat
}

pub fn sigma2_diff_hat(ts: &TwoSampleFit) -> Floored {
    let (a, b) = (&ts.fit_a, &ts.fit_b);
    let d = &a.beta_hat - &b.beta_hat;
    let qa = a.design().half_inv(&d).norm_squared();
    let qb = b.design().half_inv(&d).norm_squared();
    // Each quadratic form overshoots by σ̂²_ε σ̂²_δ tr(AB), hence the negative cross term.
    let raw = trace_correction(a) + trace_correction(b) - 4.0 * a.sigma2_hat * b.sigma2_hat * ts.cross_trace
        + 4.0 * a.sigma2_hat * qa
        + 4.0 * b.sigma2_hat * qb;
    let (s2, n) = ts.floor_scale();
    positive_or_floor(raw, s2, n)
}

fn require_noise(ts: &TwoSampleFit) -> Result<()> {
    if ts.fit_a.sigma2_hat > 0.0 || ts.fit_b.sigma2_hat > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateVariance("both residual variance estimates are zero"))
    }
}

/// Test of `β₀ = γ₀`. The one-sided p-value is for `‖β₀ − γ₀‖² > 0`.
pub fn test_equality(ts: &TwoSampleFit, alpha: f64) -> Result<InferenceResult> {
    require_noise(ts)?;
    let var = sigma2_diff_hat(ts);
    let mut flags = BTreeSet::new();
    var.note(Flag::SigmaDiffFloored, &mut flags);
    InferenceResult::build(TestSetup {
        estimate: diff_norm_estimate(ts),
        null_value: 0.0,
        std_error: var.value.sqrt(),
        alpha,
        tail: Some(Tail::Upper),
        bounds: None,
        flags,
    })
}

/// Power `Φ(Φ⁻¹(α) + δ/σ̂)` of the one-sided equality test at separation `delta`.
pub fn equality_power(std_error: f64, delta: f64, alpha: f64) -> Result<f64> {
    Ok(normal_cdf(normal_quantile(alpha)? + delta / std_error))
}

struct CorrectedNorms {
    beta: f64,
    gamma: f64,
}

fn corrected_norms(ts: &TwoSampleFit) -> Result<CorrectedNorms> {
    let beta = quad_norm_estimate(&ts.fit_a);
    if !(beta > 0.0) {
        return Err(Error::DegenerateDenominator(beta));
    }
    let gamma = quad_norm_estimate(&ts.fit_b);
    if !(gamma > 0.0) {
        return Err(Error::DegenerateDenominator(gamma));
    }
    Ok(CorrectedNorms { beta, gamma })
}

/// `γ̂ᵀβ̂ / (‖β‖̂ ‖γ‖̂)` with bias-corrected norms; not clamped to `[−1, 1]`.
pub fn theta_hat(ts: &TwoSampleFit) -> Result<f64> {
    let norms = corrected_norms(ts)?;
    Ok(ts.fit_b.beta_hat.dot(&ts.fit_a.beta_hat) / (norms.beta * norms.gamma).sqrt())
}

/// Quadratic-form part shared by both variance estimates of the angle:
/// `σ̂²_δ uᵀ(VᵀV)⁻¹u + σ̂²_ε vᵀ(XᵀX)⁻¹v` with `u = β̂ − γ̂ g/γn`, `v = γ̂ − β̂ g/βn`.
fn projected_forms(ts: &TwoSampleFit, beta_norm2: f64, gamma_norm2: f64) -> f64 {
    let (a, b) = (&ts.fit_a, &ts.fit_b);
    let g = b.beta_hat.dot(&a.beta_hat);
    let u = &a.beta_hat - &b.beta_hat * (g / gamma_norm2);
    let v = &b.beta_hat - &a.beta_hat * (g / beta_norm2);
    b.sigma2_hat * b.design().half_inv(&u).norm_squared() + a.sigma2_hat * a.design().half_inv(&v).norm_squared()
}

pub fn sigma2_theta_hat(ts: &TwoSampleFit) -> Result<Floored> {
    let norms = corrected_norms(ts)?;
    let (a, b) = (&ts.fit_a, &ts.fit_b);
    let (bn, gn) = (norms.beta, norms.gamma);
    let g = b.beta_hat.dot(&a.beta_hat);
    let prod = bn * gn;
    let raw = (-a.sigma2_hat * b.sigma2_hat * ts.cross_trace + projected_forms(ts, bn, gn)) / prod
        + g * g / (4.0 * bn * gn.powi(3)) * trace_correction(b)
        + g * g / (4.0 * bn.powi(3) * gn) * trace_correction(a);
    let (s2, n) = ts.floor_scale();
    Ok(positive_or_floor(raw, s2, n))
}

/// Uncorrected angle `γ̂ᵀβ̂/(‖β̂‖‖γ̂‖)` and its plug-in variance.
pub fn conventional_theta(ts: &TwoSampleFit) -> Result<(f64, Floored)> {
    let (a, b) = (&ts.fit_a, &ts.fit_b);
    let bn = a.beta_hat.norm_squared();
    let gn = b.beta_hat.norm_squared();
    if !(bn > 0.0 && gn > 0.0) {
        return Err(Error::DegenerateDenominator(bn.min(gn)));
    }
    let theta = b.beta_hat.dot(&a.beta_hat) / (bn * gn).sqrt();
    let raw = projected_forms(ts, bn, gn) / (bn * gn);
    let (s2, n) = ts.floor_scale();
    Ok((theta, positive_or_floor(raw, s2, n)))
}

pub fn test_coheritability(ts: &TwoSampleFit, theta_null: f64, alpha: f64, method: Method) -> Result<InferenceResult> {
    if !(theta_null > -1.0 && theta_null < 1.0) {
        return Err(Error::Domain(format!(
            "null angle must lie in (-1,1), got {theta_null}"
        )));
    }
    require_noise(ts)?;
    let mut flags = BTreeSet::new();
    let (estimate, var) = match method {
        Method::Proposed => {
            let var = sigma2_theta_hat(ts)?;
            var.note(Flag::SigmaThetaFloored, &mut flags);
            (theta_hat(ts)?, var)
        }
        Method::Conventional => {
            let (theta, var) = conventional_theta(ts)?;
            var.note(Flag::SigmaThetaConventionalFloored, &mut flags);
            (theta, var)
        }
    };
    InferenceResult::build(TestSetup {
        estimate,
        null_value: theta_null,
        std_error: var.value.sqrt(),
        alpha,
        tail: None,
        bounds: Some((-1.0, 1.0)),
        flags,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TwoSampleKind {
    Equality,
    Coheritability,
}
