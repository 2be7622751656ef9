//! Numerical integration used by the order-statistic and regularity code.
//!
//! Two rules are provided. [`tanh_sinh`] is a double-exponential rule that
//! passes the integrand the exact distance of each node to both endpoints,
//! which keeps quantile integrands such as `(1 - u)^(-1/2)` accurate right up
//! to the boundary. [`gauss_kronrod`] is an adaptive G7/K15 rule for smooth
//! integrands on finite intervals.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_PI_2;

/// Result of a quadrature call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

const TS_T_MAX: f64 = 6.5;
const TS_MAX_LEVEL: u32 = 12;

/// Integrates `f` over `[a, b]` with the tanh-sinh rule.
///
/// The closure receives `(x, x - a, b - x)`; the two distances are computed
/// without cancellation so callers can evaluate functions of `1 - u` exactly
/// near `u = 1`.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate>
where
    F: Fn(f64, f64, f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(Error::Domain(format!("tanh-sinh needs a finite interval, got [{a}, {b}]")));
    }
    if b == a {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let half = 0.5 * (b - a);

    // Contribution of the node at parameter t (both signs handled by symmetry).
    let node = |t: f64| -> f64 {
        let s = FRAC_PI_2 * t.sinh();
        let cosh_s = s.cosh();
        if !cosh_s.is_finite() {
            return 0.0;
        }
        let w = half * FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
        // Distance to the nearer endpoint: half * e^{-|s|} / cosh(s).
        let near = half * (-s.abs()).exp() / cosh_s;
        let far = (b - a) - near;
        if near <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let (lo, hi) = if s >= 0.0 { (far, near) } else { (near, far) };
        let x = if s >= 0.0 { b - hi } else { a + lo };
        let fx = f(x, lo, hi);
        if fx.is_finite() {
            w * fx
        } else {
            0.0
        }
    };

    let mut h = 1.0;
    let mut sum = node(0.0);
    let mut t = h;
    while t <= TS_T_MAX {
        sum += node(t) + node(-t);
        t += h;
    }
    let mut previous = sum * h;
    let mut error = f64::INFINITY;
    for level in 1..=TS_MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        while t <= TS_T_MAX {
            sum += node(t) + node(-t);
            t += 2.0 * h;
        }
        let current = sum * h;
        error = (current - previous).abs();
        if level >= 4 && error <= abs_tol.max(rel_tol * current.abs()) {
            return Ok(Estimate { value: current, error });
        }
        previous = current;
    }
    if error <= 1e3 * abs_tol.max(rel_tol * previous.abs()) {
        return Ok(Estimate { value: previous, error });
    }
    Err(Error::QuadratureFailure { estimate: previous, error })
}

// Gauss-Kronrod 7/15 nodes and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss-Kronrod integration of a smooth `f` over a finite interval.
pub fn gauss_kronrod<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("Gauss-Kronrod needs a finite interval, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    // Global adaptive bisection: always split the interval with the largest error.
    let (v0, e0) = gk15(&f, lo, hi);
    let mut intervals = vec![(lo, hi, v0, e0)];
    let mut total = v0;
    let mut total_err = e0;
    for _ in 0..2000 {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(Estimate { value: sign * total, error: total_err });
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty interval list");
        let (l, r, v, e) = intervals.swap_remove(idx);
        let mid = 0.5 * (l + r);
        let (vl, el) = gk15(&f, l, mid);
        let (vr, er) = gk15(&f, mid, r);
        total += vl + vr - v;
        total_err += el + er - e;
        intervals.push((l, mid, vl, el));
        intervals.push((mid, r, vr, er));
    }
    // Recompute to shed accumulated rounding in the running totals.
    let value: f64 = intervals.iter().map(|iv| iv.2).sum();
    let error: f64 = intervals.iter().map(|iv| iv.3).sum();
    if error <= 10.0 * abs_tol.max(rel_tol * value.abs()) {
        Ok(Estimate { value: sign * value, error })
    } else {
        Err(Error::QuadratureFailure { estimate: sign * value, error })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_sinh_handles_inverse_sqrt_singularity() {
        // ∫_0^1 (1-u)^{-1/2} du = 2
        let est = tanh_sinh(|_, _, hi| hi.powf(-0.5), 0.0, 1.0, 0.0, 1e-12).unwrap();
        assert!((est.value - 2.0).abs() < 1e-10, "{est:?}");
    }

    #[test]
    fn tanh_sinh_log_singularity() {
        // ∫_0^1 -ln(1-u) du = 1
        let est = tanh_sinh(|_, _, hi| -hi.ln(), 0.0, 1.0, 0.0, 1e-12).unwrap();
        assert!((est.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn tanh_sinh_polynomial_on_shifted_interval() {
        let est = tanh_sinh(|x, _, _| x * x, 1.0, 3.0, 0.0, 1e-13).unwrap();
        assert!((est.value - 26.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn gauss_kronrod_smooth() {
        let est = gauss_kronrod(|x: f64| x.exp(), 0.0, 2.0, 1e-14, 1e-13).unwrap();
        assert!((est.value - (2f64.exp() - 1.0)).abs() < 1e-12);
        let rev = gauss_kronrod(|x: f64| x.exp(), 2.0, 0.0, 1e-14, 1e-13).unwrap();
        assert!((rev.value + est.value).abs() < 1e-12);
    }

    #[test]
    fn gauss_kronrod_peaked() {
        // ∫_0^1 1/(1-z) dz over [0, 0.999] = ln 1000
        let est = gauss_kronrod(|z: f64| 1.0 / (1.0 - z), 0.0, 0.999, 1e-13, 1e-12).unwrap();
        assert!((est.value - 1000f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn empty_interval_is_zero() {
        assert_eq!(gauss_kronrod(|x| x, 1.0, 1.0, 1e-12, 1e-12).unwrap().value, 0.0);
        assert_eq!(tanh_sinh(|x, _, _| x, 1.0, 1.0, 0.0, 1e-12).unwrap().value, 0.0);
    }
}
