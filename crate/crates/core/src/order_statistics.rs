//! Order statistics of i.i.d. valuations: expectations, tail probabilities
//! and a seeded sampler.
//!
//! Rank 1 is the largest of the sample. Expectations are computed from the
//! quantile form `E[v^(j,t)] = ∫_0^1 Q(u) β(u) du` where `β` is the
//! Beta(t - j + 1, j) density, which needs only the quantile function and is
//! well conditioned in the upper tail.

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod, tanh_sinh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::factorial::ln_binomial;

/// The `rank`-th largest of `size` i.i.d. draws from `dist`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatSpec {
    pub rank: usize,
    pub size: usize,
    pub dist: Distribution,
}

impl OrderStatSpec {
    pub fn new(rank: usize, size: usize, dist: Distribution) -> Result<Self> {
        if rank == 0 || rank > size {
            return Err(Error::invalid(format!(
                "order statistic rank {rank} must lie in 1..={size}"
            )));
        }
        Ok(Self { rank, size, dist })
    }

    pub fn expectation(&self) -> Result<f64> {
        expected_order_stat(&self.dist, self.rank, self.size)
    }
}

/// CDF of the sample maximum, `F(v)^t`.
pub fn first_order_stat_cdf(d: &Distribution, t: usize, v: f64) -> f64 {
    d.cdf(v).powi(t as i32)
}

/// Survival of the sample maximum, `1 - F(v)^t`, without cancellation.
pub fn first_order_stat_sf(d: &Distribution, t: usize, v: f64) -> f64 {
    let sf = d.sf(v);
    if sf >= 1.0 {
        return 1.0;
    }
    -(t as f64 * (-sf).ln_1p()).exp_m1()
}

/// `E[v^(rank, size)]`.
pub fn expected_order_stat(d: &Distribution, rank: usize, size: usize) -> Result<f64> {
    if rank == 0 || rank > size {
        return Err(Error::invalid(format!(
            "order statistic rank {rank} must lie in 1..={size}"
        )));
    }
    if let Some(alpha) = d.tail_index() {
        if rank as f64 * alpha <= 1.0 {
            return Err(Error::NonIntegrable { rank, size, tail_index: alpha });
        }
    }
    let t = size as f64;
    // Beta(a, b) weight on the quantile level u.
    let a = (size - rank + 1) as f64;
    let b = rank as f64;
    let log_coef = t.ln() + ln_binomial((size - 1) as u64, (rank - 1) as u64);
    let weight = |u: f64, one_minus_u: f64| -> f64 {
        let mut lw = log_coef;
        if a > 1.0 {
            lw += (a - 1.0) * u.ln();
        }
        if b > 1.0 {
            lw += (b - 1.0) * one_minus_u.ln();
        }
        lw.exp()
    };
    let quantile = |u: f64, one_minus_u: f64| -> f64 {
        if u < 0.5 {
            d.quantile(u)
        } else {
            d.quantile_sf(one_minus_u)
        }
    };

    // Split [0, 1] around the bulk of the Beta weight so that narrow peaks
    // (large samples) are resolved.
    let mean = a / (a + b);
    let sd = (a * b / ((a + b) * (a + b) * (a + b + 1.0))).sqrt();
    let mut cuts = vec![0.0, 1.0];
    for m in [-10.0, -6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0, 10.0] {
        let c = mean + m * sd;
        if c > 1e-6 && c < 1.0 - 1e-6 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let scale = d.mean().abs().max(d.support().0.abs()).max(1.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let piece = tanh_sinh(
            |_, from_lo, from_hi| {
                let u = lo + from_lo;
                let one_minus_u = (1.0 - hi) + from_hi;
                quantile(u, one_minus_u) * weight(u, one_minus_u)
            },
            lo,
            hi,
            1e-14 * scale,
            1e-11,
        )?;
        total += piece.value;
    }
    Ok(total)
}

/// `E[v^(1,t)]` from the survival integral `v_lo + ∫ (1 - F^t)`, truncated at
/// the `1 - 1e-8` quantile on infinite supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalIntegral {
    pub value: f64,
    /// Upper bound on the discarded tail, `t * ∫_{x_T}^∞ (1 - F)`.
    pub truncation_bound: f64,
}

pub fn expected_max_by_survival(d: &Distribution, t: usize) -> Result<SurvivalIntegral> {
    if t == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let (lo, hi) = d.support();
    let upper = if hi.is_finite() { hi } else { d.quantile_sf(1e-8) };
    let est = gauss_kronrod(|x| first_order_stat_sf(d, t, x), lo, upper, 1e-13, 1e-12)?;
    let truncation_bound = if hi.is_finite() { 0.0 } else { t as f64 * d.tail_integral(upper) };
    Ok(SurvivalIntegral { value: lo + est.value, truncation_bound })
}

/// `t` i.i.d. draws by inversion, sorted in descending order.
///
/// The sort is stable, so exact ties keep their draw order.
pub fn sample_order_stats(d: &Distribution, t: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_sorted_with(d, t, &mut rng)
}

pub(crate) fn sample_sorted_with<R: Rng>(d: &Distribution, t: usize, rng: &mut R) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..t).map(|_| d.quantile(rng.gen::<f64>())).collect();
    draws.sort_by(|x, y| y.total_cmp(x));
    draws
}

/// `P[v^(1,t) >= E[v^(1,t)]]`.
pub fn tail_probability_vs_mean(d: &Distribution, t: usize) -> Result<f64> {
    let mean = expected_order_stat(d, 1, t)?;
    Ok(first_order_stat_sf(d, t, mean))
}

/// Expected optimal welfare with `k` identical items, `Σ_{j<=k} E[v^(j,n)]`.
pub fn expected_top_k_sum(d: &Distribution, n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    (1..=k).map(|j| expected_order_stat(d, j, n)).sum()
}

/// Expected optimal welfare with item weights `etas`, `Σ_j η_j E[v^(j,n)]`.
pub fn expected_weighted_welfare(d: &Distribution, n: usize, etas: &[f64]) -> Result<f64> {
    if etas.len() > n {
        return Err(Error::invalid(format!("{} items exceed n = {n} buyers", etas.len())));
    }
    etas.iter()
        .enumerate()
        .map(|(j, &eta)| Ok(eta * expected_order_stat(d, j + 1, n)?))
        .sum()
}
