//! Point and variance estimators for quadratic functionals of the coefficient
//! vector, the error variance, and the signal-to-noise decomposition.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ModelFit;

/// Diagnostic markers carried alongside estimates and test results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flag {
    ZetaNFloored,
    ZetaStarFloored,
    Nu4Floored,
    ZetaEpsFloored,
    SigmaEtaFloored,
    SigmaRhoFloored,
    SigmaRhoConventionalFloored,
    SigmaDiffFloored,
    SigmaThetaFloored,
    SigmaThetaConventionalFloored,
    IntervalClamped,
}

impl Flag {
    pub const ALL: [Flag; 11] = [
        Flag::ZetaNFloored,
        Flag::ZetaStarFloored,
        Flag::Nu4Floored,
        Flag::ZetaEpsFloored,
        Flag::SigmaEtaFloored,
        Flag::SigmaRhoFloored,
        Flag::SigmaRhoConventionalFloored,
        Flag::SigmaDiffFloored,
        Flag::SigmaThetaFloored,
        Flag::SigmaThetaConventionalFloored,
        Flag::IntervalClamped,
    ];

    /// Stable bit position, used by the C interface.
    pub fn bit(self) -> u32 {
        1 << Flag::ALL.iter().position(|f| *f == self).unwrap()
    }
}

/// A variance-type estimate after the positivity floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floored {
    pub value: f64,
    pub raw: f64,
    pub floored: bool,
}

impl Floored {
    fn exact(value: f64) -> Self {
        Floored {
            value,
            raw: value,
            floored: false,
        }
    }

    pub fn note(&self, flag: Flag, flags: &mut BTreeSet<Flag>) {
        if self.floored {
            flags.insert(flag);
        }
    }
}

/// Floor used when a variance estimate is not strictly positive:
/// `1e-12 σ̂⁴/n`, or `1e-300` when `σ̂ = 0`.
pub fn floor_level(sigma2: f64, n: usize) -> f64 {
    if sigma2 > 0.0 {
        1e-12 * sigma2 * sigma2 / n as f64
    } else {
        1e-300
    }
}

pub(crate) fn positive_or_floor(raw: f64, sigma2: f64, n: usize) -> Floored {
    if raw > 0.0 {
        Floored::exact(raw)
    } else {
        Floored {
            value: floor_level(sigma2, n),
            raw,
            floored: true,
        }
    }
}

/// `‖β̂‖² − tr{(XᵀX)⁻¹} σ̂²`; unclamped.
pub fn quad_norm_estimate(fit: &ModelFit) -> f64 {
    fit.beta_hat.norm_squared() - fit.trace_inv() * fit.sigma2_hat
}

/// Variance terms shared by the corrected statistics: `2σ̂⁴ tr(A²)` and
/// `2σ̂⁴ tr(A)²/(n−p)`.
fn trace_terms(fit: &ModelFit) -> (f64, f64) {
    let s4 = fit.sigma2_hat * fit.sigma2_hat;
    let tr1 = fit.trace_inv();
    let dof = (fit.n() - fit.p()) as f64;
    (2.0 * s4 * fit.trace_inv2(), 2.0 * s4 * tr1 * tr1 / dof)
}

pub fn zeta_n2_hat(fit: &ModelFit) -> Floored {
    let (t2, t11) = trace_terms(fit);
    let raw = zeta0_2_hat(fit) - t2 + t11;
    positive_or_floor(raw, fit.sigma2_hat, fit.n())
}

pub fn zeta_star2_hat(fit: &ModelFit) -> Floored {
    let (t2, t11) = trace_terms(fit);
    positive_or_floor(t2 + t11, fit.sigma2_hat, fit.n())
}

/// `4σ̂² β̂ᵀ(XᵀX)⁻¹β̂`; nonnegative by construction.
pub fn zeta0_2_hat(fit: &ModelFit) -> f64 {
    4.0 * fit.sigma2_hat * fit.beta_quad_form()
}

/// Fourth-moment estimate of the errors, floored at `σ̂⁴`.
pub fn nu4_hat(fit: &ModelFit, residuals: &nalgebra::DVector<f64>) -> Floored {
    let n = fit.n() as f64;
    let tau = fit.p() as f64 / n;
    let s4 = fit.sigma2_hat * fit.sigma2_hat;
    let m4 = residuals.iter().map(|e| e.powi(4)).sum::<f64>() / n;
    let raw = (m4 - 3.0 * s4 * tau * (1.0 - tau).powi(2) * (2.0 - tau)) / (1.0 - tau).powi(4);
    if raw > s4 {
        Floored::exact(raw)
    } else {
        Floored {
            value: s4,
            raw,
            floored: true,
        }
    }
}

/// `n⁻¹{ν̂₄ + σ̂⁴(3p/n − 1)/(1 − p/n)}`.
pub fn zeta_eps2_hat(fit: &ModelFit, nu4: f64) -> Floored {
    let n = fit.n() as f64;
    let tau = fit.p() as f64 / n;
    let s4 = fit.sigma2_hat * fit.sigma2_hat;
    let raw = (nu4 + s4 * (3.0 * tau - 1.0) / (1.0 - tau)) / n;
    positive_or_floor(raw, fit.sigma2_hat, fit.n())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimates {
    pub zeta_n2: f64,
    pub zeta_star2: f64,
    pub zeta0_2: f64,
    pub zeta_eps2: f64,
    pub nu4_hat: f64,
    pub floored: BTreeSet<Flag>,
}

pub fn variance_estimates(fit: &ModelFit) -> VarianceEstimates {
    let mut floored = BTreeSet::new();
    let zn = zeta_n2_hat(fit);
    zn.note(Flag::ZetaNFloored, &mut floored);
    let zs = zeta_star2_hat(fit);
    zs.note(Flag::ZetaStarFloored, &mut floored);
    let nu4 = nu4_hat(fit, &fit.residuals);
    nu4.note(Flag::Nu4Floored, &mut floored);
    let ze = zeta_eps2_hat(fit, nu4.value);
    ze.note(Flag::ZetaEpsFloored, &mut floored);
    VarianceEstimates {
        zeta_n2: zn.value,
        zeta_star2: zs.value,
        zeta0_2: zeta0_2_hat(fit),
        zeta_eps2: ze.value,
        nu4_hat: nu4.value,
        floored,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnrEstimates {
    pub eta_hat: f64,
    pub rho_hat: f64,
    pub sigma2_rho: f64,
    pub sigma2_eta: f64,
    pub mean_y4: f64,
    pub nu4_hat: f64,
    pub floored: BTreeSet<Flag>,
}

/// `η̂`, `ρ̂` and their plug-in variances. Uses the fourth moment of the
/// response cached on the fit.
pub fn snr_estimates(fit: &ModelFit) -> Result<SnrEstimates> {
    let n = fit.n() as f64;
    let p = fit.p() as f64;
    let tau = p / n;
    let s2 = fit.sigma2_hat;
    let s4 = s2 * s2;
    let eta = fit.fitted_sq_norm() / n - s2 * tau;
    let total = eta + s2;
    if !(total > 0.0) {
        return Err(Error::DegenerateScale(total));
    }
    let rho = eta / total;
    let mut floored = BTreeSet::new();
    let nu4 = nu4_hat(fit, &fit.residuals);
    nu4.note(Flag::Nu4Floored, &mut floored);
    let nu4 = nu4.value;
    let m4 = fit.response_m4;

    let bracket = 2.0 * s4 * s4 * tau / (1.0 - tau) - (2.0 + 4.0 * tau / (tau - 1.0)) * s4 * s2 * eta
        + s4 * (m4 - nu4 + eta * eta * (4.0 * tau - 2.0) / (1.0 - tau))
        + eta * eta * nu4;
    let sigma2_rho = positive_or_floor(bracket / (n * total.powi(4)), s2, fit.n());
    sigma2_rho.note(Flag::SigmaRhoFloored, &mut floored);

    let raw_eta = (m4 - nu4 - 2.0 * s2 * eta - eta * eta + 2.0 * s4 * p / (n - p)) / n;
    let sigma2_eta = positive_or_floor(raw_eta, s2, fit.n());
    sigma2_eta.note(Flag::SigmaEtaFloored, &mut floored);

    Ok(SnrEstimates {
        eta_hat: eta,
        rho_hat: rho,
        sigma2_rho: sigma2_rho.value,
        sigma2_eta: sigma2_eta.value,
        mean_y4: m4,
        nu4_hat: nu4,
        floored,
    })
}

/// Conventional (uncorrected) `ρ̃ = η̃/(η̃ + σ̂²)` with `η̃ = ‖Xβ̂‖²/n`, and its
/// plug-in variance.
pub fn conventional_rho(fit: &ModelFit) -> Result<(f64, Floored)> {
    let n = fit.n() as f64;
    let s2 = fit.sigma2_hat;
    let s4 = s2 * s2;
    let eta = fit.fitted_sq_norm() / n;
    let total = eta + s2;
    if !(total > 0.0) {
        return Err(Error::DegenerateScale(total));
    }
    let m4e = fit.residuals.iter().map(|e| e.powi(4)).sum::<f64>() / n;
    let bracket = s4 * (fit.response_m4 - m4e) - 2.0 * s4 * s2 * eta + eta * eta * (m4e - 2.0 * s4);
    let var = positive_or_floor(bracket / (n * total.powi(4)), s2, fit.n());
    Ok((eta / total, var))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{ols_fit, Dataset, Design};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector, DMatrix, DVector};
    use std::sync::Arc;

    /// A fit whose Gram is diag(4, 9) with n = 10 and prescribed β̂, σ̂².
    ///
    /// Rows 0 and 1 carry the Gram; the response on the remaining rows is
    /// orthogonal to both columns and sized to produce the requested RSS.
    fn diag_fit(beta: [f64; 2], sigma2: f64) -> ModelFit {
        let n = 10;
        let mut x = DMatrix::zeros(n, 2);
        x[(0, 0)] = 2.0;
        x[(1, 1)] = 3.0;
        let mut y = DVector::zeros(n);
        y[0] = 2.0 * beta[0];
        y[1] = 3.0 * beta[1];
        // eight residuals of magnitude σ̂ give rss = 8σ̂² = σ̂²(n−p)
        let r = sigma2.sqrt();
        for i in 2..n {
            y[i] = if i % 2 == 0 { r } else { -r };
        }
        ModelFit::new(Arc::new(Design::new(x).unwrap()), &y).unwrap()
    }

    #[test]
    fn diag_fit_has_requested_moments() {
        let fit = diag_fit([1.0, -0.5], 2.0);
        assert_relative_eq!(fit.beta_hat, dvector![1.0, -0.5], epsilon = 1e-14);
        assert_relative_eq!(fit.sigma2_hat, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn hand_quad_norm() {
        let ds = Dataset::new(dvector![2.0, 4.0, 6.0], dmatrix![1.0; 1.0; 1.0]).unwrap();
        let fit = ols_fit(&ds).unwrap();
        assert_relative_eq!(quad_norm_estimate(&fit), 44.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_quad_norm_is_raw_norm() {
        let fit = diag_fit([1.5, 2.0], 0.0);
        assert_eq!(quad_norm_estimate(&fit), fit.beta_hat.norm_squared());
        let zn = zeta_n2_hat(&fit);
        assert!(zn.floored && zn.value <= 1e-300);
        let zs = zeta_star2_hat(&fit);
        assert!(zs.floored && zs.value <= 1e-300);
    }

    #[test]
    fn hand_zeta_values() {
        let fit = diag_fit([1.0, 0.0], 1.0);
        let tr1: f64 = 13.0 / 36.0;
        let star = 2.0 * 97.0 / 1296.0 + 2.0 * tr1 * tr1 / 8.0;
        let zn = 1.0 - 2.0 * 97.0 / 1296.0 + 2.0 * tr1 * tr1 / 8.0;
        assert_relative_eq!(zeta_n2_hat(&fit).value, zn, max_relative = 1e-12);
        assert_relative_eq!(zeta_n2_hat(&fit).value, 0.882_908_950_617_284, max_relative = 1e-12);
        assert_relative_eq!(zeta_star2_hat(&fit).value, star, max_relative = 1e-12);
        assert_relative_eq!(zeta_star2_hat(&fit).value, 0.182_291_666_666_667, max_relative = 1e-12);
    }

    #[test]
    fn hand_zeta0() {
        let fit = diag_fit([1.0, 1.0], 2.0);
        assert_relative_eq!(zeta0_2_hat(&fit), 26.0 / 9.0, max_relative = 1e-12);
        assert_eq!(zeta0_2_hat(&diag_fit([0.0, 0.0], 2.0)), 0.0);
    }

    #[test]
    fn hand_zeta_eps() {
        // n = 100, p = 50 and σ̂² = 1 from a diagonal design.
        let n = 100;
        let p = 50;
        let mut x = DMatrix::zeros(n, p);
        for j in 0..p {
            x[(j, j)] = 1.0;
        }
        let mut y = DVector::zeros(n);
        for i in p..n {
            y[i] = if i % 2 == 0 { 1.0 } else { -1.0 };
        }
        let fit = ModelFit::new(Arc::new(Design::new(x).unwrap()), &y).unwrap();
        assert_relative_eq!(fit.sigma2_hat, 1.0, epsilon = 1e-14);
        let z = zeta_eps2_hat(&fit, 3.0);
        assert!(!z.floored);
        assert_relative_eq!(z.value, 0.04, max_relative = 1e-12);
    }

    #[test]
    fn zero_residuals_floor_nu4() {
        let fit = diag_fit([1.0, 2.0], 0.0);
        let nu = nu4_hat(&fit, &fit.residuals);
        assert!(nu.floored);
        assert_eq!(nu.value, 0.0);
    }

    #[test]
    fn noiseless_rho_is_one() {
        let fit = diag_fit([1.0, 2.0], 0.0);
        let snr = snr_estimates(&fit).unwrap();
        assert_eq!(snr.rho_hat, 1.0);
    }

    #[test]
    fn zero_response_is_degenerate_scale() {
        let fit = diag_fit([0.0, 0.0], 0.0);
        assert!(matches!(snr_estimates(&fit), Err(Error::DegenerateScale(_))));
    }

    #[test]
    fn flag_bits_are_distinct() {
        let mut seen = 0u32;
        for f in Flag::ALL {
            assert_eq!(seen & f.bit(), 0);
            seen |= f.bit();
        }
    }
}
