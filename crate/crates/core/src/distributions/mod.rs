//! Valuation distributions and the λ-regularity toolkit built on top of them.

mod regularity;

pub use regularity::{
    c_of_lambda, check_lambda_regularity, g_lambda, gamma_h_representation, gamma_lambda, hazard,
    inverse_virtual_value, virtual_value, GammaHRepresentation, RegularityCertificate,
};

use crate::error::{Error, Result};
use statrs::function::gamma::{gamma, gamma_ur};
use std::fmt;
use std::str::FromStr;

/// A continuous valuation distribution with a positive density on its support.
///
/// Every family knows the regularity class it belongs to (see
/// [`Distribution::lambda_claimed`]); formulas throughout the crate consume
/// that value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// `F(v) = 1 - exp(-rate * v)` on `[0, ∞)`.
    Exponential { rate: f64 },
    /// Uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
    /// `F(v) = 1 - exp(-(v / scale)^shape)` on `[0, ∞)`, `shape >= 1`.
    Weibull { scale: f64, shape: f64 },
    /// `F(v) = 1 - (scale / v)^shape` on `[scale, ∞)`, `shape >= 1`.
    Pareto { shape: f64, scale: f64 },
    /// `F(v) = n/(n-1) * (1 - 1/v)` on `[1, n)`: equal revenue at every price,
    /// truncated so that the mean is finite.
    TruncatedEqualRevenue { n: f64 },
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {x}")))
    }
}

impl Distribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        check_positive("rate", rate)?;
        Ok(Self::Exponential { rate })
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi && lo >= 0.0) {
            return Err(Error::invalid(format!(
                "uniform needs 0 <= lo < hi < ∞, got [{lo}, {hi}]"
            )));
        }
        Ok(Self::Uniform { lo, hi })
    }

    pub fn weibull(scale: f64, shape: f64) -> Result<Self> {
        check_positive("scale", scale)?;
        check_positive("shape", shape)?;
        if shape < 1.0 {
            return Err(Error::invalid(format!(
                "weibull shape {shape} < 1 is not regular for any lambda"
            )));
        }
        Ok(Self::Weibull { scale, shape })
    }

    pub fn pareto(shape: f64, scale: f64) -> Result<Self> {
        check_positive("scale", scale)?;
        check_positive("shape", shape)?;
        if shape < 1.0 {
            return Err(Error::invalid(format!(
                "pareto shape {shape} < 1 is not regular"
            )));
        }
        Ok(Self::Pareto { shape, scale })
    }

    pub fn truncated_equal_revenue(n: f64) -> Result<Self> {
        if !(n.is_finite() && n > 1.0) {
            return Err(Error::invalid(format!("truncation point must exceed 1, got {n}")));
        }
        Ok(Self::TruncatedEqualRevenue { n })
    }

    /// Support `[lo, hi]`; `hi` may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Self::Exponential { .. } | Self::Weibull { .. } => (0.0, f64::INFINITY),
            Self::Uniform { lo, hi } => (lo, hi),
            Self::Pareto { scale, .. } => (scale, f64::INFINITY),
            Self::TruncatedEqualRevenue { n } => (1.0, n),
        }
    }

    /// The regularity class the family belongs to: 0 for MHR families,
    /// `1/shape` for Pareto, 1 for the truncated equal-revenue family.
    pub fn lambda_claimed(&self) -> f64 {
        match *self {
            Self::Exponential { .. } | Self::Uniform { .. } | Self::Weibull { .. } => 0.0,
            Self::Pareto { shape, .. } => 1.0 / shape,
            Self::TruncatedEqualRevenue { .. } => 1.0,
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v <= lo {
            return 0.0;
        }
        if v >= hi {
            return 1.0;
        }
        match *self {
            Self::Exponential { rate } => -(-rate * v).exp_m1(),
            Self::Uniform { lo, hi } => (v - lo) / (hi - lo),
            Self::Weibull { scale, shape } => -(-(v / scale).powf(shape)).exp_m1(),
            Self::Pareto { .. } => 1.0 - self.sf(v),
            Self::TruncatedEqualRevenue { n } => n / (n - 1.0) * (1.0 - 1.0 / v),
        }
    }

    /// Survival function `1 - F(v)`, evaluated without cancellation in the upper tail.
    pub fn sf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v <= lo {
            return 1.0;
        }
        if v >= hi {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => (-rate * v).exp(),
            Self::Uniform { lo, hi } => (hi - v) / (hi - lo),
            Self::Weibull { scale, shape } => (-(v / scale).powf(shape)).exp(),
            Self::Pareto { shape, scale } => (scale / v).powf(shape),
            Self::TruncatedEqualRevenue { n } => (n / v - 1.0) / (n - 1.0),
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        let (lo, hi) = self.support();
        if v < lo || v > hi {
            return 0.0;
        }
        match *self {
            Self::Exponential { rate } => rate * (-rate * v).exp(),
            Self::Uniform { lo, hi } => 1.0 / (hi - lo),
            Self::Weibull { scale, shape } => {
                let z = v / scale;
                shape / scale * z.powf(shape - 1.0) * (-z.powf(shape)).exp()
            }
            Self::Pareto { shape, scale } => shape / v * (scale / v).powf(shape),
            Self::TruncatedEqualRevenue { n } => n / (n - 1.0) / (v * v),
        }
    }

    /// Inverse hazard `(1 - F(v)) / f(v)`, in closed form so it stays finite
    /// where both numerator and denominator underflow.
    pub fn mills_ratio(&self, v: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Uniform { hi, .. } => (hi - v).max(0.0),
            Self::Weibull { scale, shape } => {
                scale / shape * (v / scale).powf(1.0 - shape)
            }
            Self::Pareto { shape, .. } => v / shape,
            Self::TruncatedEqualRevenue { n } => (v - v * v / n).max(0.0),
        }
    }

    /// Generalized inverse of the CDF on `[0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return self.support().0;
        }
        if u >= 1.0 {
            return self.support().1;
        }
        match *self {
            Self::Exponential { rate } => -(-u).ln_1p() / rate,
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Weibull { scale, shape } => scale * (-(-u).ln_1p()).powf(1.0 / shape),
            Self::Pareto { .. } => self.quantile_sf(1.0 - u),
            Self::TruncatedEqualRevenue { n } => 1.0 / (1.0 - u * (n - 1.0) / n),
        }
    }

    /// The value whose survival probability is `q`, i.e. `quantile(1 - q)`
    /// computed without forming `1 - q`.
    pub fn quantile_sf(&self, q: f64) -> f64 {
        if q >= 1.0 {
            return self.support().0;
        }
        if q <= 0.0 {
            return self.support().1;
        }
        match *self {
            Self::Exponential { rate } => -q.ln() / rate,
            Self::Uniform { lo, hi } => hi - q * (hi - lo),
            Self::Weibull { scale, shape } => scale * (-q.ln()).powf(1.0 / shape),
            Self::Pareto { shape, scale } => scale * q.powf(-1.0 / shape),
            Self::TruncatedEqualRevenue { n } => n / (1.0 + q * (n - 1.0)),
        }
    }

    /// Tail index `a` when `1 - F(v) ~ v^{-a}`; `None` for light tails.
    pub fn tail_index(&self) -> Option<f64> {
        match *self {
            Self::Pareto { shape, .. } => Some(shape),
            _ => None,
        }
    }

    /// Closed-form mean.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Uniform { lo, hi } => 0.5 * (lo + hi),
            Self::Weibull { scale, shape } => scale * gamma(1.0 + 1.0 / shape),
            Self::Pareto { shape, scale } => {
                if shape > 1.0 {
                    shape * scale / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::TruncatedEqualRevenue { n } => n / (n - 1.0) * n.ln(),
        }
    }

    /// `∫_x^{hi} (1 - F(z)) dz`, the mean mass above `x`; used to bound
    /// the error of truncating an integral over an infinite support.
    pub fn tail_integral(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x >= hi {
            return 0.0;
        }
        if x < lo {
            return (lo - x) + self.tail_integral(lo);
        }
        match *self {
            Self::Exponential { rate } => (-rate * x).exp() / rate,
            Self::Uniform { lo, hi } => (hi - x).powi(2) / (2.0 * (hi - lo)),
            Self::Weibull { scale, shape } => {
                let a = 1.0 / shape;
                let z = (x / scale).powf(shape);
                let upper = if z > 0.0 { gamma_ur(a, z) } else { 1.0 };
                scale / shape * gamma(a) * upper
            }
            Self::Pareto { shape, scale } => {
                if shape > 1.0 {
                    scale.powf(shape) * x.powf(1.0 - shape) / (shape - 1.0)
                } else {
                    f64::INFINITY
                }
            }
            Self::TruncatedEqualRevenue { n } => (n * (n / x).ln() - (n - x)) / (n - 1.0),
        }
    }

    /// Draw one value from a uniform variate by inversion.
    pub fn sample_from_uniform(&self, u: f64) -> f64 {
        self.quantile(u)
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            Self::Weibull { scale, shape } => write!(f, "weibull:{scale}:{shape}"),
            Self::Pareto { shape, scale } => write!(f, "pareto:{shape}:{scale}"),
            Self::TruncatedEqualRevenue { n } => write!(f, "ter:{n}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Parses descriptors such as `exp:1.0`, `uniform:0:1`, `pareto:2:1`,
    /// `weibull:1:2` and `ter:100`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let nums = |expected: usize| -> Result<Vec<f64>> {
            if parts.len() != expected + 1 {
                return Err(Error::parse(
                    s,
                    format!("expected {expected} parameter(s), found {}", parts.len() - 1),
                ));
            }
            parts[1..]
                .iter()
                .map(|p| p.parse::<f64>().map_err(|e| Error::parse(s, e.to_string())))
                .collect()
        };
        let wrap = |r: Result<Self>| r.map_err(|e| Error::parse(s, e.to_string()));
        match parts[0].to_ascii_lowercase().as_str() {
            "exp" | "exponential" => {
                let p = nums(1)?;
                wrap(Self::exponential(p[0]))
            }
            "uniform" | "unif" => {
                let p = nums(2)?;
                wrap(Self::uniform(p[0], p[1]))
            }
            "weibull" => {
                let p = nums(2)?;
                wrap(Self::weibull(p[0], p[1]))
            }
            "pareto" => {
                let p = nums(2)?;
                wrap(Self::pareto(p[0], p[1]))
            }
            "ter" => {
                let p = nums(1)?;
                wrap(Self::truncated_equal_revenue(p[0]))
            }
            other => Err(Error::parse(s, format!("unknown family `{other}`"))),
        }
    }
}

/// The families exercised by the test and check suites, at their declared λ.
pub fn builtin_families() -> Vec<Distribution> {
    vec![
        Distribution::Exponential { rate: 1.0 },
        Distribution::Uniform { lo: 0.0, hi: 1.0 },
        Distribution::Weibull { scale: 1.0, shape: 2.0 },
        Distribution::Pareto { shape: 2.0, scale: 1.0 },
        Distribution::TruncatedEqualRevenue { n: 100.0 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptors_round_trip() {
        for d in builtin_families() {
            let parsed: Distribution = d.to_string().parse().unwrap();
            assert_eq!(parsed, d);
        }
        assert_eq!(
            "weibull:1:2".parse::<Distribution>().unwrap(),
            Distribution::Weibull { scale: 1.0, shape: 2.0 }
        );
        assert_eq!(
            "pareto:2:1".parse::<Distribution>().unwrap(),
            Distribution::Pareto { shape: 2.0, scale: 1.0 }
        );
    }

    #[test]
    fn bad_descriptors_are_rejected() {
        for bad in ["", "exp", "exp:-1", "uniform:1:0", "gauss:0:1", "ter:1", "exp:x", "pareto:0.5:1"] {
            assert!(bad.parse::<Distribution>().is_err(), "{bad}");
        }
    }

    #[test]
    fn cdf_quantile_inverse_on_grid() {
        for d in builtin_families() {
            for i in 1..=999 {
                let u = i as f64 / 1000.0;
                let v = d.quantile(u);
                assert!((d.cdf(v) - u).abs() < 1e-9, "{d} u={u}");
                let w = d.quantile_sf(1.0 - u);
                assert!((w - v).abs() <= 1e-9 * v.abs().max(1.0), "{d} u={u}");
            }
        }
    }

    #[test]
    fn cdf_is_monotone_and_pdf_positive_inside() {
        for d in builtin_families() {
            let (lo, _) = d.support();
            assert_eq!(d.cdf(lo), 0.0);
            let mut prev = 0.0;
            for i in 1..200 {
                let v = d.quantile(i as f64 / 200.0);
                let c = d.cdf(v);
                assert!(c >= prev);
                prev = c;
                assert!(d.pdf(v) > 0.0);
                assert!((d.cdf(v) + d.sf(v) - 1.0).abs() < 1e-12);
            }
            assert!(d.cdf(d.quantile_sf(1e-12)) > 1.0 - 1e-11);
        }
    }

    #[test]
    fn pdf_matches_finite_difference_of_cdf() {
        for d in builtin_families() {
            for i in 1..50 {
                let v = d.quantile(i as f64 / 50.0);
                let h = 1e-6 * v.max(1.0);
                let fd = (d.cdf(v + h) - d.cdf(v - h)) / (2.0 * h);
                assert!((fd - d.pdf(v)).abs() < 1e-6 * d.pdf(v).max(1.0), "{d} v={v}");
            }
        }
    }

    #[test]
    fn mills_ratio_matches_sf_over_pdf() {
        for d in builtin_families() {
            for i in 1..100 {
                let v = d.quantile(i as f64 / 100.0);
                let direct = d.sf(v) / d.pdf(v);
                assert!((d.mills_ratio(v) - direct).abs() < 1e-10 * direct.max(1.0), "{d} v={v}");
            }
        }
    }

    #[test]
    fn tail_integral_at_lower_end_is_mean_minus_lo() {
        for d in builtin_families() {
            let (lo, _) = d.support();
            let expected = d.mean() - lo;
            assert!((d.tail_integral(lo) - expected).abs() < 1e-10 * expected.max(1.0), "{d}");
        }
    }

    #[test]
    fn declared_lambdas() {
        assert_eq!(Distribution::exponential(3.0).unwrap().lambda_claimed(), 0.0);
        assert_eq!(Distribution::pareto(2.0, 1.0).unwrap().lambda_claimed(), 0.5);
        assert_eq!(Distribution::truncated_equal_revenue(60.0).unwrap().lambda_claimed(), 1.0);
    }
}
