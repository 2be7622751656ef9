//! Hazard rates, virtual values and the λ-regularity apparatus.
//!
//! Convention: a distribution is λ-regular when the generalized virtual
//! margin `m_λ(v) = λ v - (1 - F(v)) / f(v)` is nondecreasing. With this sign
//! λ = 0 is the monotone-hazard-rate class and λ = 1 is Myerson regularity.

use super::Distribution;
use crate::error::{Error, Result};
use crate::quadrature::gauss_kronrod;

fn check_in_support(d: &Distribution, v: f64) -> Result<()> {
    let (lo, hi) = d.support();
    if v.is_nan() || v < lo || v > hi {
        return Err(Error::OutOfSupport { value: v, lo, hi });
    }
    Ok(())
}

/// Hazard rate `f(v) / (1 - F(v))`.
pub fn hazard(d: &Distribution, v: f64) -> Result<f64> {
    check_in_support(d, v)?;
    if v >= d.support().1 {
        return Err(Error::OutOfSupport { value: v, lo: d.support().0, hi: d.support().1 });
    }
    if d.sf(v) < f64::MIN_POSITIVE {
        return Err(Error::TailDegenerate(v));
    }
    Ok(1.0 / d.mills_ratio(v))
}

/// Virtual value `φ(v) = v - (1 - F(v)) / f(v)`.
pub fn virtual_value(d: &Distribution, v: f64) -> Result<f64> {
    check_in_support(d, v)?;
    let m = d.mills_ratio(v);
    if m.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(v - m)
}

/// Root of `φ(v) = target` by bisection; `inverse_virtual_value(d, 0)` is the
/// monopoly reserve price.
pub fn inverse_virtual_value(d: &Distribution, target: f64) -> Result<f64> {
    let (lo, hi_support) = d.support();
    let phi = |v: f64| virtual_value(d, v);
    let phi_lo = phi(lo)?;
    if target < phi_lo {
        return Err(Error::OutOfRange { target, lo: phi_lo, hi: f64::INFINITY });
    }
    if target == phi_lo {
        return Ok(lo);
    }

    let mut hi = if hi_support.is_finite() {
        hi_support
    } else {
        let mut h = d.quantile(0.5).max(lo + 1.0);
        let mut found = false;
        for _ in 0..200 {
            if phi(h)? >= target {
                found = true;
                break;
            }
            h = lo + 2.0 * (h - lo);
        }
        if !found {
            return Err(Error::OutOfRange { target, lo: phi_lo, hi: phi(h)? });
        }
        h
    };
    let phi_hi = phi(hi)?;
    if phi_hi < target {
        return Err(Error::OutOfRange { target, lo: phi_lo, hi: phi_hi });
    }
    if phi_hi < phi_lo {
        return Err(Error::NonMonotone(hi));
    }

    let mut lo_v = lo;
    for _ in 0..300 {
        let mid = 0.5 * (lo_v + hi);
        if mid <= lo_v || mid >= hi {
            break;
        }
        let pm = phi(mid)?;
        if pm < target {
            lo_v = mid;
        } else {
            hi = mid;
        }
    }
    let root = if (phi(lo_v)? - target).abs() < (phi(hi)? - target).abs() { lo_v } else { hi };
    let residual = (phi(root)? - target).abs();
    if residual > 1e-9 * target.abs().max(1.0) {
        return Err(Error::NonMonotone(root));
    }
    Ok(root)
}

/// Outcome of a grid test of λ-regularity.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityCertificate {
    pub lambda: f64,
    pub grid: Vec<f64>,
    /// Smallest forward difference of `m_λ` between consecutive grid points.
    pub min_slope: f64,
    /// Magnitude used for the relative tolerance.
    pub scale: f64,
    pub tolerance: f64,
    /// Grid point at which `min_slope` was observed.
    pub worst_at: f64,
    pub passed: bool,
}

/// Tests monotonicity of `m_λ(v) = λv - (1-F)/f` on a quantile-spaced grid
/// trimmed at probabilities `1e-6` and `1 - 1e-6`.
pub fn check_lambda_regularity(d: &Distribution, lambda: f64, grid_size: usize) -> Result<RegularityCertificate> {
    if grid_size < 8 {
        return Err(Error::invalid(format!("grid_size must be at least 8, got {grid_size}")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    const TRIM: f64 = 1e-6;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| {
            let t = i as f64 / (grid_size - 1) as f64;
            let u = TRIM + t * (1.0 - 2.0 * TRIM);
            if u < 0.5 {
                d.quantile(u)
            } else {
                d.quantile_sf(1.0 - u)
            }
        })
        .collect();
    let margins: Vec<f64> = grid.iter().map(|&v| lambda * v - d.mills_ratio(v)).collect();
    // Cancellation between the two terms makes max|m| a poor yardstick
    // (Pareto at λ = 1/shape has m ≡ 0), so scale by the terms themselves.
    let scale = grid
        .iter()
        .map(|&v| lambda * v.abs() + d.mills_ratio(v).abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let tolerance = 1e-7 * scale;
    let (mut min_slope, mut worst_at) = (f64::INFINITY, grid[0]);
    for i in 0..grid.len() - 1 {
        let diff = margins[i + 1] - margins[i];
        if diff < min_slope {
            min_slope = diff;
            worst_at = grid[i];
        }
    }
    Ok(RegularityCertificate {
        lambda,
        grid,
        min_slope,
        scale,
        tolerance,
        worst_at,
        passed: min_slope >= -tolerance,
    })
}

/// `g_λ(x) = ((1 - x)^{-λ} - 1) / λ`, with the λ = 0 limit `-ln(1 - x)`.
pub fn g_lambda(lambda: f64, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("g_lambda needs 0 <= x < 1, got {x}")));
    }
    let log_sf = (-x).ln_1p();
    if lambda == 0.0 {
        Ok(-log_sf)
    } else {
        Ok((-lambda * log_sf).exp_m1() / lambda)
    }
}

/// `Γ_λ(u) = (1 + λu)^{-1/λ}`, with the λ = 0 limit `e^{-u}`.
pub fn gamma_lambda(lambda: f64, u: f64) -> f64 {
    if lambda == 0.0 {
        (-u).exp()
    } else {
        (-(lambda * u).ln_1p() / lambda).exp()
    }
}

/// `c(λ) = (1 - λ)^{1/λ}`, with `c(0) = 1/e` and `c(1) = 0`.
pub fn c_of_lambda(lambda: f64) -> f64 {
    assert!((0.0..=1.0).contains(&lambda), "lambda must lie in [0, 1], got {lambda}");
    if lambda == 0.0 {
        (-1.0f64).exp()
    } else {
        ((-lambda).ln_1p() / lambda).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaHRepresentation {
    /// `H_λ(v) = ∫_{v_lo}^{v} h_F(z) / (1 - F(z))^λ dz`.
    pub h_value: f64,
    /// `|Γ_λ(H_λ(v)) - (1 - F(v))|`.
    pub reconstruction_error: f64,
    pub quadrature_error: f64,
}

/// Computes `H_λ(v)` by adaptive quadrature and checks `1 - F = Γ_λ ∘ H_λ`.
pub fn gamma_h_representation(d: &Distribution, lambda: f64, v: f64) -> Result<GammaHRepresentation> {
    check_in_support(d, v)?;
    let (lo, hi) = d.support();
    if v >= hi {
        return Err(Error::OutOfSupport { value: v, lo, hi });
    }
    let rate = |z: f64| 1.0 / (d.mills_ratio(z) * d.sf(z).powf(lambda));
    let est = gauss_kronrod(rate, lo, v, 1e-14, 1e-12)?;
    let reconstruction_error = (gamma_lambda(lambda, est.value) - d.sf(v)).abs();
    Ok(GammaHRepresentation {
        h_value: est.value,
        reconstruction_error,
        quadrature_error: est.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::builtin_families;

    fn exp1() -> Distribution {
        Distribution::exponential(1.0).unwrap()
    }
    fn unif() -> Distribution {
        Distribution::uniform(0.0, 1.0).unwrap()
    }
    fn pareto2() -> Distribution {
        Distribution::pareto(2.0, 1.0).unwrap()
    }

    #[test]
    fn hazard_examples() {
        assert!((hazard(&exp1(), 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((hazard(&unif(), 0.5).unwrap() - 2.0).abs() < 1e-15);
        let h = hazard(&pareto2(), 2.0).unwrap();
        assert!((h - 1.0).abs() < 1e-15);
        // finite-difference confirmation: h = -d/dv ln(1-F)
        let eps = 1e-6;
        let fd = -((pareto2().sf(2.0 + eps)).ln() - (pareto2().sf(2.0 - eps)).ln()) / (2.0 * eps);
        assert!((fd - h).abs() < 1e-8);
    }

    #[test]
    fn hazard_errors() {
        assert!(matches!(hazard(&exp1(), -1.0), Err(Error::OutOfSupport { .. })));
        assert!(matches!(hazard(&unif(), 1.0), Err(Error::OutOfSupport { .. })));
        assert!(matches!(hazard(&exp1(), 800.0), Err(Error::TailDegenerate(_))));
    }

    #[test]
    fn virtual_value_examples() {
        assert!((virtual_value(&exp1(), 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(virtual_value(&unif(), 0.5).unwrap().abs() < 1e-15);
        assert!((virtual_value(&pareto2(), 4.0).unwrap() - 2.0).abs() < 1e-14);
        // numerically from cdf/pdf
        let d = pareto2();
        let numeric = 4.0 - d.sf(4.0) / d.pdf(4.0);
        assert!((numeric - 2.0).abs() < 1e-12);
        assert!(virtual_value(&unif(), 1.5).is_err());
    }

    #[test]
    fn inverse_virtual_value_examples() {
        assert!((inverse_virtual_value(&exp1(), 0.0).unwrap() - 1.0).abs() < 1e-9);
        assert!((inverse_virtual_value(&unif(), 0.0).unwrap() - 0.5).abs() < 1e-9);
        assert!((inverse_virtual_value(&exp1(), 0.5).unwrap() - 1.5).abs() < 1e-9);
        assert!(matches!(inverse_virtual_value(&exp1(), -2.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(inverse_virtual_value(&unif(), 1.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn virtual_value_round_trip_on_quantile_grid() {
        for d in builtin_families() {
            for i in 1..100 {
                let v = d.quantile(i as f64 / 100.0);
                let phi = virtual_value(&d, v).unwrap();
                assert!(phi <= v);
                let back = inverse_virtual_value(&d, phi).unwrap();
                assert!((back - v).abs() < 1e-6 * v.max(1.0), "{d}: v={v} back={back}");
            }
        }
    }

    #[test]
    fn regularity_examples() {
        assert!(check_lambda_regularity(&exp1(), 0.0, 64).unwrap().passed);
        assert!(check_lambda_regularity(&pareto2(), 0.5, 64).unwrap().passed);
        assert!(!check_lambda_regularity(&pareto2(), 0.25, 64).unwrap().passed);
        assert!(check_lambda_regularity(&unif(), 0.0, 64).unwrap().passed);
        assert!(check_lambda_regularity(&exp1(), 0.0, 7).is_err());
    }

    #[test]
    fn mhr_families_pass_and_pareto_fails_at_zero() {
        for d in [exp1(), unif(), Distribution::weibull(1.0, 2.0).unwrap(), Distribution::weibull(2.0, 1.0).unwrap()] {
            assert!(check_lambda_regularity(&d, 0.0, 400).unwrap().passed, "{d}");
        }
        let cert = check_lambda_regularity(&pareto2(), 0.0, 400).unwrap();
        assert!(!cert.passed);
        assert!(cert.min_slope < -cert.tolerance);
    }

    #[test]
    fn every_builtin_is_regular_at_its_declared_lambda() {
        for d in builtin_families() {
            assert!(check_lambda_regularity(&d, d.lambda_claimed(), 400).unwrap().passed, "{d}");
        }
        // the truncated equal-revenue family is regular but not better
        let ter = Distribution::truncated_equal_revenue(100.0).unwrap();
        assert!(!check_lambda_regularity(&ter, 0.5, 400).unwrap().passed);
    }

    #[test]
    fn g_lambda_examples() {
        assert!((g_lambda(1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((g_lambda(0.0, 1.0 - (-1.0f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        for l in [0.0, 0.3, 1.0] {
            assert_eq!(g_lambda(l, 0.0).unwrap(), 0.0);
        }
        assert!(g_lambda(0.5, 1.0).is_err());
    }

    #[test]
    fn g_lambda_is_increasing_and_convex() {
        for l in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let xs: Vec<f64> = (0..200).map(|i| i as f64 / 201.0).collect();
            let g: Vec<f64> = xs.iter().map(|&x| g_lambda(l, x).unwrap()).collect();
            for w in g.windows(3) {
                assert!(w[1] > w[0]);
                assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
            }
        }
    }

    #[test]
    fn g_lambda_small_lambda_limit_is_continuous() {
        let x = 0.7;
        assert!((g_lambda(1e-9, x).unwrap() - g_lambda(0.0, x).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn c_of_lambda_examples_and_monotonicity() {
        assert!((c_of_lambda(0.0) - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!((c_of_lambda(0.5) - 0.25).abs() < 1e-15);
        assert_eq!(c_of_lambda(1.0), 0.0);
        let mut prev = c_of_lambda(0.0);
        for i in 1..=100 {
            let c = c_of_lambda(i as f64 / 100.0);
            assert!(c < prev);
            prev = c;
        }
        assert!((c_of_lambda(1e-10) - c_of_lambda(0.0)).abs() < 1e-9);
    }

    #[test]
    fn gamma_h_examples() {
        let r = gamma_h_representation(&exp1(), 0.0, 2.0).unwrap();
        assert!((r.h_value - 2.0).abs() < 1e-12);
        assert!(r.reconstruction_error < 1e-12);
        let r = gamma_h_representation(&unif(), 0.0, 0.5).unwrap();
        assert!((r.h_value - 2f64.ln()).abs() < 1e-12);
        for d in builtin_families() {
            let r = gamma_h_representation(&d, d.lambda_claimed(), d.support().0).unwrap();
            assert_eq!(r.h_value, 0.0);
            assert_eq!(r.reconstruction_error, 0.0);
        }
    }

    #[test]
    fn gamma_h_reconstructs_survival_on_grid() {
        for d in builtin_families() {
            let lambda = d.lambda_claimed();
            for i in 0..50 {
                let u = 0.001 + 0.998 * i as f64 / 49.0;
                let v = d.quantile(u);
                let r = gamma_h_representation(&d, lambda, v).unwrap();
                assert!(r.reconstruction_error <= 1e-6, "{d} v={v}: {r:?}");
                // independent closed form: H_λ = g_λ ∘ F
                let closed = g_lambda(lambda, d.cdf(v)).unwrap();
                assert!((r.h_value - closed).abs() <= 1e-8 * closed.max(1.0), "{d} v={v}");
            }
        }
    }
}
