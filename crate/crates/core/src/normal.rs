//! Standard normal CDF and quantile via the complementary error function.

use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// `Φ(z)`, evaluated as `½ erfc(−z/√2)` so the lower tail keeps full relative precision.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(z)` without cancellation.
pub fn normal_sf(z: f64) -> f64 {
    normal_cdf(-z)
}

/// `Φ⁻¹(q)` for `q ∈ (0, 1)`.
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs q in (0,1), got {q}")));
    }
    Ok(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * q))
}

/// Two-sided p-value `2Φ(−|z|)`.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * normal_cdf(-z.abs())).min(1.0)
}
