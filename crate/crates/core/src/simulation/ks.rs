//! One-sample Kolmogorov-Smirnov test against Unif[0, 1].

use crate::error::{Error, Result};

/// Returns the statistic `D` and its asymptotic p-value.
pub fn ks_uniformity(p_values: &[f64]) -> Result<(f64, f64)> {
    if p_values.is_empty() {
        return Err(Error::Dimension("KS test needs at least one value".into()));
    }
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain("KS uniformity input outside [0,1]".into()));
    }
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / m - u).max(u - i as f64 / m))
        .fold(0.0, f64::max);
    let lambda = (m.sqrt() + 0.12 + 0.11 / m.sqrt()) * d;
    Ok((d, kolmogorov_q(lambda)))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`, clamped to `[0, 1]`.
///
/// Below `λ = 1` the alternating series converges slowly, so the equivalent
/// Jacobi theta form `1 − (√(2π)/λ) Σ_{k≥1} e^{−(2k−1)²π²/(8λ²)}` is used.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1.. {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * c).exp();
            sum += term;
            if term < 1e-12 * sum.max(f64::MIN_POSITIVE) || term == 0.0 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += sign * term;
            if term < 1e-12 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    };
    q.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_midpoint() {
        let (d, _) = ks_uniformity(&[0.5]).unwrap();
        assert_eq!(d, 0.5);
    }

    #[test]
    fn midpoint_grid() {
        let m = 40;
        let grid: Vec<f64> = (1..=m).map(|i| (i as f64 - 0.5) / m as f64).collect();
        let (d, p) = ks_uniformity(&grid).unwrap();
        assert!((d - 0.5 / m as f64).abs() < 1e-15);
        assert!(p > 0.999);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(ks_uniformity(&[]), Err(Error::Dimension(_))));
    }

    #[test]
    fn both_forms_agree_near_one() {
        // direct alternating series evaluated to convergence at the switch point
        let direct = |l: f64| {
            2.0 * (1..200)
                .map(|k| {
                    let s = if k % 2 == 1 { 1.0 } else { -1.0 };
                    s * (-2.0 * (k * k) as f64 * l * l).exp()
                })
                .sum::<f64>()
        };
        for l in [0.6, 0.8, 0.99, 1.0, 1.2] {
            assert!((kolmogorov_q(l) - direct(l)).abs() < 1e-12, "lambda={l}");
        }
    }

    #[test]
    fn known_critical_value() {
        // Q(1.358) ≈ 0.05, the classical 5% critical value
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
    }
}
