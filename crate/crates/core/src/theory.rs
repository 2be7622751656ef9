//! Numerical verifiers for the inequalities behind the revenue guarantees.
//!
//! Each check evaluates an inequality on a grid (uniform in probability, so
//! heavy tails are covered) and reports the most violating slack. A registry
//! runs every check over the built-in families at their declared λ, together
//! with negative controls that must fail.

use crate::agents::{estimate_tau, purchase_threshold, BehaviorModel};
use crate::distributions::{builtin_families, c_of_lambda, check_lambda_regularity, Distribution};
use crate::error::{Error, Result};
use crate::order_statistics::{
    expected_order_stat, first_order_stat_sf, sample_sorted_with, tail_probability_vs_mean,
};
use crate::util::{format_sig, mean_and_variance, replicate_rng};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rayon::prelude::*;
use std::fmt;

/// Default number of grid points.
pub const GRID_SIZE: usize = 400;

/// Outcome of one numerical check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Smallest slack observed; negative means the inequality was violated.
    pub worst_margin: f64,
    /// Where the worst slack occurred.
    pub at: String,
    pub tolerance: f64,
    pub passed: bool,
    /// Negative controls are built to fail; they do not count toward the
    /// suite verdict.
    pub negative_control: bool,
}

impl CheckResult {
    fn new(name: impl Into<String>, worst_margin: f64, at: impl Into<String>, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            worst_margin,
            at: at.into(),
            tolerance,
            passed: worst_margin >= -tolerance,
            negative_control: false,
        }
    }

    /// Row `name,worst_margin,at,passed`.
    pub fn row(&self) -> String {
        format!("{},{},{},{}", self.name, format_sig(self.worst_margin, 6), self.at, self.passed)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.row())
    }
}

// Tracks the minimum margin and where it happened.
struct Worst {
    margin: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Worst { margin: f64::INFINITY, at: String::from("none") }
    }

    fn update(&mut self, margin: f64, at: impl FnOnce() -> String) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.at = at();
        }
    }
}

fn probability_grid(size: usize) -> Vec<f64> {
    (1..=size).map(|i| i as f64 / (size + 1) as f64).collect()
}

/// `g_λ(F(x)^n)`, evaluated from `F^n` in the body and from `1 - F^n` in the
/// upper tail to avoid cancellation.
fn g_of_max_cdf(d: &Distribution, lambda: f64, n: usize, x: f64) -> f64 {
    let y = d.cdf(x).powi(n as i32);
    // ln(1 - F^n)
    let log_s = if y < 0.5 { (-y).ln_1p() } else { first_order_stat_sf(d, n, x).ln() };
    if lambda == 0.0 {
        -log_s
    } else {
        (-lambda * log_s).exp_m1() / lambda
    }
}

/// Convexity of `x ↦ g_λ(F(x)^n)` for `n = 1..=n_max`, via divided second
/// differences on a quantile grid, relative to the largest slope on the grid.
pub fn check_fact1_convexity(d: &Distribution, lambda: f64, n_max: usize) -> Result<CheckResult> {
    check_fact1_convexity_on(d, lambda, n_max, GRID_SIZE)
}

pub fn check_fact1_convexity_on(d: &Distribution, lambda: f64, n_max: usize, grid: usize) -> Result<CheckResult> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("λ = {lambda} must lie in [0, 1]")));
    }
    let xs: Vec<f64> = probability_grid(grid).iter().map(|&u| d.quantile(u)).collect();
    let mut worst = Worst::new();
    for n in 1..=n_max.max(1) {
        let hs: Vec<f64> = xs.iter().map(|&x| g_of_max_cdf(d, lambda, n, x)).collect();
        let slopes: Vec<f64> = (1..xs.len()).map(|i| (hs[i] - hs[i - 1]) / (xs[i] - xs[i - 1])).collect();
        let scale = slopes.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(f64::MIN_POSITIVE);
        for i in 1..slopes.len() {
            let margin = (slopes[i] - slopes[i - 1]) / scale;
            worst.update(margin, || format!("n={n} x={}", format_sig(xs[i], 6)));
        }
    }
    Ok(CheckResult::new(format!("fact1[{d} λ={lambda}]"), worst.margin, worst.at, 1e-6))
}

/// `h(F) = n F^n / (1 - F^n) - F / (1 - F)` at `F = 1 - eps`.
pub fn lamb_aux_h(n: usize, eps: f64) -> f64 {
    let log_f = (-eps).ln_1p();
    let f_n = (n as f64 * log_f).exp();
    let one_minus_f_n = -(n as f64 * log_f).exp_m1();
    n as f64 * f_n / one_minus_f_n - (1.0 - eps) / eps
}

/// Boundary behaviour of `h` as `F → 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambAuxBoundary {
    pub n: usize,
    pub limit: f64,
    /// `h(1 - eps)`.
    pub raw: f64,
    /// Richardson extrapolation `2 h(1 - eps) - h(1 - 2 eps)`, which removes
    /// the first-order term `eps (n² - 1) / 12`.
    pub extrapolated: f64,
}

pub fn lamb_aux_boundary(n: usize, eps: f64) -> LambAuxBoundary {
    let raw = lamb_aux_h(n, eps);
    LambAuxBoundary {
        n,
        limit: -(n as f64 - 1.0) / 2.0,
        raw,
        extrapolated: 2.0 * raw - lamb_aux_h(n, 2.0 * eps),
    }
}

const LAMB_AUX_LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// `(1+λ) n F^n / (1 - F^n) + (n - 1) >= (1+λ) F / (1 - F)` on
/// `F ∈ [0, 1 - 1e-4]`, for the listed λ and `2 <= n <= n_max`.
pub fn check_lamb_aux(n_max: usize) -> Result<CheckResult> {
    if n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    // 1 - F: uniform in F plus a geometric refinement toward F = 1.
    let mut eps: Vec<f64> = (0..=2000).map(|i| 1.0 - i as f64 / 2000.0 * (1.0 - 1e-4)).collect();
    eps.extend((10..=40).map(|t| 10f64.powf(-t as f64 / 10.0)));
    let mut worst = Worst::new();
    for n in 2..=n_max {
        let nf = n as f64;
        for &lambda in &LAMB_AUX_LAMBDAS {
            for &e in &eps {
                let (lhs, rhs) = if e >= 1.0 {
                    (nf - 1.0, 0.0)
                } else {
                    let log_f = (-e).ln_1p();
                    let f_n = (nf * log_f).exp();
                    let s = -(nf * log_f).exp_m1();
                    ((1.0 + lambda) * nf * f_n / s + (nf - 1.0), (1.0 + lambda) * (1.0 - e) / e)
                };
                let margin = (lhs - rhs) / lhs.abs().max(rhs.abs()).max(1.0);
                worst.update(margin, || format!("n={n} λ={lambda} F={}", format_sig(1.0 - e, 8)));
            }
        }
    }
    Ok(CheckResult::new("lamb_aux", worst.margin, worst.at, 1e-9))
}

/// `lim_{F→1} h(F) = -(n-1)/2`, reproduced at `F = 1 - eps` by extrapolation.
pub fn check_lamb_aux_boundary(n_max: usize, eps: f64) -> Result<CheckResult> {
    if n_max < 2 {
        return Err(Error::invalid("n_max must be at least 2"));
    }
    let mut worst = Worst::new();
    for n in 2..=n_max {
        let b = lamb_aux_boundary(n, eps);
        worst.update(-(b.extrapolated - b.limit).abs(), || {
            format!("n={n} raw={} extrapolated={}", format_sig(b.raw, 10), format_sig(b.extrapolated, 10))
        });
    }
    Ok(CheckResult::new("lamb_aux_boundary", worst.margin, worst.at, 1e-6))
}

/// Outcome of checking the claimed optimum of the pricing program
/// `max Σ r_j e^{-n p_j}` s.t. `n Σ_{j<=s} p_j >= s c(λ)/2`, `0 <= p_j <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptProgReport {
    pub check: CheckResult,
    /// The claimed optimum `p_j = c(λ)/(2n)`.
    pub analytic_point: Vec<f64>,
    pub analytic_objective: f64,
    /// Best point found by vertex enumeration.
    pub oracle_point: Vec<f64>,
    pub oracle_objective: f64,
    /// Best objective from randomized coordinate descent (independent oracle).
    pub descent_objective: f64,
    /// Largest coordinate distance between the oracle and claimed points.
    pub argument_distance: f64,
    /// Whether `S_j = r_j e^{-c/2} / n` satisfies the stated dual constraints.
    pub dual_feasible: bool,
    pub dual_objective: f64,
}

fn optprog_objective(rs: &[f64], n: f64, p: &[f64]) -> f64 {
    rs.iter().zip(p).map(|(r, pj)| r * (-n * pj).exp()).sum()
}

fn optprog_feasible(p: &[f64], n: f64, c: f64, tol: f64) -> bool {
    let mut prefix = 0.0;
    for (s, &pj) in p.iter().enumerate() {
        if pj < -tol || pj > 1.0 + tol {
            return false;
        }
        prefix += pj;
        if n * prefix < (s + 1) as f64 * c / 2.0 - tol {
            return false;
        }
    }
    true
}

// Solves the square system `a x = b` by Gaussian elimination with partial
// pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..k {
            let factor = a[row][col] / a[col][col];
            if factor != 0.0 {
                for c2 in col..k {
                    a[row][c2] -= factor * a[col][c2];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c2| a[row][c2] * x[c2]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn combinations(m: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + m - k {
            return;
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Maximizes the convex objective over the polytope by enumerating its
/// vertices (every choice of `k` active constraints); exact for convex
/// maximization.
pub fn optprog_vertex_oracle(rs: &[f64], n: usize, lambda: f64) -> (Vec<f64>, f64) {
    let k = rs.len();
    let nf = n as f64;
    let c = c_of_lambda(lambda);
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(3 * k);
    for s in 1..=k {
        rows.push(((0..k).map(|j| if j < s { 1.0 } else { 0.0 }).collect(), s as f64 * c / (2.0 * nf)));
    }
    for j in 0..k {
        let e: Vec<f64> = (0..k).map(|i| if i == j { 1.0 } else { 0.0 }).collect();
        rows.push((e.clone(), 0.0));
        rows.push((e, 1.0));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    combinations(rows.len(), k, |active| {
        let a: Vec<Vec<f64>> = active.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = active.iter().map(|&i| rows[i].1).collect();
        if let Some(p) = solve(a, b) {
            if optprog_feasible(&p, nf, c, 1e-10) {
                let obj = optprog_objective(rs, nf, &p);
                if best.as_ref().is_none_or(|(_, o)| obj > *o + 1e-15) {
                    best = Some((p, obj));
                }
            }
        }
    });
    best.expect("the uniform point is a feasible vertex")
}

/// Randomized projected coordinate descent on `p`: each coordinate moves to
/// the smallest value the prefix constraints allow, which is optimal for
/// that coordinate since the objective decreases in every `p_j`.
pub fn optprog_descent_oracle(rs: &[f64], n: usize, lambda: f64, starts: usize, seed: u64) -> (Vec<f64>, f64) {
    let k = rs.len();
    let nf = n as f64;
    let c = c_of_lambda(lambda);
    let need = |s: usize| s as f64 * c / (2.0 * nf);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for start in 0..starts {
        let mut rng = replicate_rng(seed, start as u64);
        let mut p: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        // Repair prefix feasibility left to right.
        let mut prefix = 0.0;
        for s in 0..k {
            if prefix + p[s] < need(s + 1) {
                p[s] = (need(s + 1) - prefix).min(1.0);
            }
            prefix += p[s];
        }
        let mut order: Vec<usize> = (0..k).collect();
        for _ in 0..1000 {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut moved = 0.0f64;
            for &j in &order {
                let mut lowest = 0.0f64;
                let mut prefix_without = 0.0;
                for s in 0..k {
                    if s != j {
                        prefix_without += p[s];
                    }
                    if s >= j {
                        lowest = lowest.max(need(s + 1) - prefix_without);
                    }
                }
                let target = lowest.min(1.0);
                moved = moved.max((p[j] - target).abs());
                p[j] = target;
            }
            if moved < 1e-15 {
                break;
            }
        }
        let obj = optprog_objective(rs, nf, &p);
        if best.as_ref().map_or(true, |(_, o)| obj > *o) {
            best = Some((p, obj));
        }
    }
    best.expect("at least one start")
}

fn join_sig(xs: &[f64]) -> String {
    xs.iter().map(|x| format_sig(*x, 6)).collect::<Vec<_>>().join(";")
}

/// Compares the claimed uniform optimum with independent oracles and checks
/// the stated dual certificate.
pub fn check_optprog(rs: &[f64], n: usize, lambda: f64) -> Result<OptProgReport> {
    if rs.is_empty() || rs.iter().any(|r| !(*r >= 0.0)) || rs.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid(format!("weights must be nonnegative and nonincreasing: {rs:?}")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("λ = {lambda} must lie in [0, 1]")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let c = c_of_lambda(lambda);
    let nf = n as f64;
    if c / 2.0 > nf {
        return Err(Error::InfeasibleClaim(format!("c(λ)/2 = {} exceeds n = {n}", c / 2.0)));
    }
    let k = rs.len();
    let analytic_point = vec![c / (2.0 * nf); k];
    let analytic_objective = optprog_objective(rs, nf, &analytic_point);
    let (vertex_point, vertex_objective) = optprog_vertex_oracle(rs, n, lambda);
    let (descent_point, descent_objective) = optprog_descent_oracle(rs, n, lambda, 20, 0x0b7);
    let (oracle_point, oracle_objective) = if descent_objective > vertex_objective {
        (descent_point, descent_objective)
    } else {
        (vertex_point, vertex_objective)
    };
    let argument_distance =
        oracle_point.iter().zip(&analytic_point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let shrink = (-c / 2.0).exp();
    let dual: Vec<f64> = rs.iter().map(|r| r * shrink / nf).collect();
    let dual_feasible = dual.windows(2).all(|w| w[0] >= w[1])
        && dual.iter().zip(rs).all(|(s, r)| *s >= r / (nf * nf.exp()) * (1.0 - 1e-12) && *s <= r / nf * (1.0 + 1e-12));
    let dual_objective: f64 = dual
        .iter()
        .zip(rs)
        .map(|(&s, &r)| if s == 0.0 { 0.0 } else { s * (nf - c / 2.0) - s * (nf * s / r).ln() })
        .sum();

    let margin = analytic_objective - oracle_objective;
    let mut check = CheckResult::new(
        format!("optprog[r={} n={n} λ={}]", join_sig(rs), format_sig(lambda, 6)),
        margin,
        format!("p={}", join_sig(&oracle_point)),
        1e-4,
    );
    check.passed = margin >= -1e-4 && argument_distance <= 1e-3;
    Ok(OptProgReport {
        check,
        analytic_point,
        analytic_objective,
        oracle_point,
        oracle_objective,
        descent_objective,
        argument_distance,
        dual_feasible,
        dual_objective,
    })
}

/// Random instances `(r, n, λ)` with `k <= 5` for the program check.
pub fn optprog_random_instances(count: usize, seed: u64) -> Vec<(Vec<f64>, usize, f64)> {
    (0..count)
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            let k = rng.gen_range(1..=5);
            let mut rs: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            rs.sort_by(|a, b| b.total_cmp(a));
            let n = rng.gen_range(1..=20);
            let lambda = rng.gen::<f64>();
            (rs, n, lambda)
        })
        .collect()
}

/// `k E[v^(1,⌈n/k⌉)] >= (1 - 1/e) Σ_{j<=k} E[v^(j,n)]`, relative slack.
///
/// With `reps > 0` the right-hand side is also estimated by Monte Carlo for
/// light-tailed families and must agree within six standard errors.
pub fn check_lemma_main(d: &Distribution, cases: &[(usize, usize)], reps: usize) -> Result<CheckResult> {
    let mut worst = Worst::new();
    for (ci, &(n, k)) in cases.iter().enumerate() {
        if k == 0 || k > n {
            return Err(Error::invalid(format!("need n >= k >= 1, got ({n}, {k})")));
        }
        let lhs = k as f64 * expected_order_stat(d, 1, n.div_ceil(k))?;
        let top: Vec<f64> = (1..=k).map(|j| expected_order_stat(d, j, n)).collect::<Result<_>>()?;
        let welfare: f64 = top.iter().sum();
        let rhs = (1.0 - (-1.0f64).exp()) * welfare;
        worst.update((lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE), || format!("n={n} k={k}"));

        let light = d.tail_index().map_or(true, |a| a > 4.0);
        if reps > 0 && light {
            let sums: Vec<f64> = (0..reps as u64)
                .into_par_iter()
                .map(|r| sample_sorted_with(d, n, &mut replicate_rng(0x1e44a + ci as u64, r))[..k].iter().sum())
                .collect();
            let (mean, var) = mean_and_variance(&sums);
            let se = (var / reps as f64).sqrt();
            if (mean - welfare).abs() > 6.0 * se + 1e-12 {
                return Ok(CheckResult::new(
                    format!("lemma_main[{d}]"),
                    -f64::INFINITY,
                    format!("n={n} k={k} Monte Carlo {mean} vs {welfare}"),
                    3e-8,
                ));
            }
        }
    }
    Ok(CheckResult::new(format!("lemma_main[{d}]"), worst.margin, worst.at, 3e-8))
}

fn binomial(n: usize, r: usize) -> BigInt {
    if r > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..r {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Rational bounds `lo < e < hi` from the partial sums of `Σ 1/i!`.
pub fn e_bounds(terms: usize) -> (BigRational, BigRational) {
    let mut sum = BigRational::zero();
    let mut fact = BigInt::one();
    for i in 0..=terms {
        if i > 0 {
            fact *= BigInt::from(i);
        }
        sum += BigRational::new(BigInt::one(), fact.clone());
    }
    // Tail Σ_{i>N} 1/i! < 1/(N! N).
    let tail = BigRational::new(BigInt::one(), fact * BigInt::from(terms.max(1)));
    (sum.clone(), sum + tail)
}

/// Exact check of `C(n-k, s) / C(n, s) <= 1/e` with `s = ⌈n/k⌉` for all
/// `1 <= k <= n <= n_max`, in rational arithmetic with rigorous bounds on e.
pub fn check_hypergeometric(n_max: usize) -> CheckResult {
    let (e_lo, e_hi) = e_bounds(30);
    let one = BigRational::one();
    let mut worst = Worst::new();
    let mut certified = true;
    for n in 1..=n_max {
        for k in 1..=n {
            let s = n.div_ceil(k);
            let q = BigRational::new(binomial(n - k, s), binomial(n, s));
            // q <= 1/e  <=  q * e_hi <= 1 ; violated if q * e_lo > 1.
            let proven = &q * &e_hi <= one;
            let refuted = &q * &e_lo > one;
            if !proven {
                certified = false;
            }
            let qf = num_traits::ToPrimitive::to_f64(&q).unwrap_or(f64::NAN);
            let margin = if refuted { -(qf - (-1.0f64).exp()).abs().max(f64::MIN_POSITIVE) } else { (-1.0f64).exp() - qf };
            worst.update(if proven { margin } else { margin.min(-f64::MIN_POSITIVE) }, || {
                format!("n={n} k={k} q={q}")
            });
        }
    }
    let mut r = CheckResult::new("lemma_main_exact", worst.margin, worst.at, 0.0);
    r.passed = certified;
    r
}

/// `P[v >= E v] >= c(λ)`, `P[v^(1,s-1) >= E v^(1,s)] >= (s-1)/s c(λ)` for
/// `2 <= s <= s_max`, and `P[v^(1,t) >= E v^(1,t)] >= c(λ)` for `t <= s_max`.
pub fn check_facts_2_3(d: &Distribution, s_max: usize) -> Result<CheckResult> {
    let c = c_of_lambda(d.lambda_claimed());
    let mut worst = Worst::new();
    let mean = d.mean();
    if !mean.is_finite() {
        return Err(Error::invalid(format!("{d} has no finite mean")));
    }
    worst.update(d.sf(mean) - c, || "fact2".to_string());
    for s in 2..=s_max {
        let target = expected_order_stat(d, 1, s)?;
        let p = first_order_stat_sf(d, s - 1, target);
        worst.update(p - (s as f64 - 1.0) / s as f64 * c, || format!("fact3 s={s}"));
    }
    for t in 1..=s_max {
        worst.update(tail_probability_vs_mean(d, t)? - c, || format!("max-of-{t}"));
    }
    Ok(CheckResult::new(format!("facts23[{d}]"), worst.margin, worst.at, 1e-4))
}

/// Default price grid: quantiles of `d`.
pub fn default_price_grid(d: &Distribution) -> Vec<f64> {
    (1..=40).map(|i| d.quantile(i as f64 / 41.0)).collect()
}

/// `P[φ(v) >= p | v >= p] >= c(λ)` in closed form over `p_grid`.
pub fn check_monopolist_tau(d: &Distribution, lambda: f64, p_grid: &[f64]) -> Result<CheckResult> {
    let c = c_of_lambda(lambda);
    let mut worst = Worst::new();
    for &p in p_grid {
        let threshold = purchase_threshold(BehaviorModel::Monopolist, d, p)?;
        let ratio = if threshold <= p { 1.0 } else { d.sf(threshold) / d.sf(p) };
        worst.update(ratio - c, || format!("p={}", format_sig(p, 6)));
    }
    Ok(CheckResult::new(format!("monopolist_tau[{d} λ={lambda}]"), worst.margin, worst.at, 1e-5))
}

/// `n P[v >= u_j] >= (j/2) c(λ)` with `u_j = E[v^(1,⌈n/j⌉)]`, for the listed
/// `n` and every `j <= n`.
pub fn check_claim_cl1(d: &Distribution, ns: &[usize]) -> Result<CheckResult> {
    let c = c_of_lambda(d.lambda_claimed());
    let mut worst = Worst::new();
    for &n in ns {
        for j in 1..=n {
            let u = expected_order_stat(d, 1, n.div_ceil(j))?;
            worst.update(n as f64 * d.sf(u) - j as f64 / 2.0 * c, || format!("n={n} j={j}"));
        }
    }
    Ok(CheckResult::new(format!("claim_cl1[{d}]"), worst.margin, worst.at, 1e-4))
}

/// λ-regularity of `d` on the default grid.
pub fn check_regularity(d: &Distribution, lambda: f64) -> Result<CheckResult> {
    let cert = check_lambda_regularity(d, lambda, GRID_SIZE)?;
    let mut r = CheckResult::new(
        format!("regularity[{d} λ={lambda}]"),
        cert.min_slope,
        format!("v={}", format_sig(cert.worst_at, 6)),
        cert.tolerance,
    );
    r.passed = cert.passed;
    Ok(r)
}

/// Names accepted by [`run_checks`].
pub const CHECK_NAMES: [&str; 11] = [
    "regularity",
    "fact1",
    "lamb_aux",
    "lamb_aux_boundary",
    "optprog",
    "optprog_random",
    "lemma_main",
    "lemma_main_exact",
    "facts23",
    "monopolist_tau",
    "claim_cl1",
];

fn negative(mut r: CheckResult) -> CheckResult {
    r.name = format!("{} (negative control)", r.name);
    r.negative_control = true;
    r
}

// One row for a batch of program instances: the worst margin, and a pass
// only if every instance passed.
fn summarize_optprog(name: &str, reports: &[OptProgReport]) -> CheckResult {
    let failures = reports.iter().filter(|r| !r.check.passed).count();
    let worst = reports
        .iter()
        .min_by(|a, b| a.check.worst_margin.total_cmp(&b.check.worst_margin))
        .expect("non-empty");
    let mut r = CheckResult::new(
        name,
        worst.check.worst_margin,
        format!("{failures}/{} instances fail; worst {}", reports.len(), worst.check.name),
        1e-4,
    );
    r.passed = failures == 0;
    r
}

fn run_named(name: &str) -> Result<Vec<CheckResult>> {
    let families = builtin_families();
    let per_family = |f: &(dyn Fn(&Distribution) -> Result<CheckResult> + Sync)| -> Result<Vec<CheckResult>> {
        families.par_iter().map(f).collect()
    };
    let pareto2 = Distribution::pareto(2.0, 1.0)?;
    match name {
        "regularity" => {
            let mut out = per_family(&|d| check_regularity(d, d.lambda_claimed()))?;
            out.push(negative(check_regularity(&pareto2, 0.0)?));
            Ok(out)
        }
        "fact1" => {
            let mut out = per_family(&|d| check_fact1_convexity(d, d.lambda_claimed(), 8))?;
            out.push(negative(check_fact1_convexity(&pareto2, 0.0, 8)?));
            Ok(out)
        }
        "lamb_aux" => Ok(vec![check_lamb_aux(16)?]),
        "lamb_aux_boundary" => Ok(vec![check_lamb_aux_boundary(8, 1e-6)?]),
        "optprog" => {
            let cases: [(&[f64], usize, f64); 3] = [(&[3.0, 2.0, 1.0], 10, 0.0), (&[3.0, 2.0, 1.0], 10, 1.0), (&[2.5], 4, 0.3)];
            let reports = cases.iter().map(|(rs, n, l)| check_optprog(rs, *n, *l)).collect::<Result<Vec<_>>>()?;
            Ok(vec![summarize_optprog("optprog", &reports)])
        }
        "optprog_random" => {
            let reports: Vec<OptProgReport> = optprog_random_instances(50, 0x0b7_0001)
                .par_iter()
                .map(|(rs, n, l)| check_optprog(rs, *n, *l))
                .collect::<Result<_>>()?;
            Ok(vec![summarize_optprog("optprog_random", &reports)])
        }
        "lemma_main" => {
            let cases = [(1, 1), (4, 2), (6, 3), (8, 3), (12, 4), (16, 5), (20, 20), (24, 7)];
            per_family(&|d| check_lemma_main(d, &cases, 20_000))
        }
        "lemma_main_exact" => Ok(vec![check_hypergeometric(24)]),
        "facts23" => per_family(&|d| check_facts_2_3(d, 32)),
        "monopolist_tau" => {
            let mut out =
                per_family(&|d| check_monopolist_tau(d, d.lambda_claimed(), &default_price_grid(d)))?;
            // Monte Carlo agreement with the closed form for the exponential.
            let exp1 = Distribution::exponential(1.0)?;
            let t = estimate_tau(BehaviorModel::Monopolist, &exp1, &[0.5, 1.0, 2.0], 100_000, 0x7a0)?;
            out.push(CheckResult::new(
                "monopolist_tau_mc[exp:1]",
                -((t.empirical - t.analytic).abs() - 5.0 * t.standard_error).max(0.0),
                format!("p={}", format_sig(t.worst_price, 6)),
                0.0,
            ));
            Ok(out)
        }
        "claim_cl1" => per_family(&|d| check_claim_cl1(d, &[4, 8, 16])),
        other => Err(Error::invalid(format!("unknown check `{other}`"))),
    }
}

/// Runs the named checks (all of them when `only` is empty), in registry
/// order.
pub fn run_checks(only: &[String]) -> Result<Vec<CheckResult>> {
    for name in only {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::invalid(format!("unknown check `{name}`")));
        }
    }
    let selected: Vec<&str> =
        CHECK_NAMES.iter().copied().filter(|n| only.is_empty() || only.iter().any(|o| o == n)).collect();
    let groups: Vec<Result<Vec<CheckResult>>> = selected.par_iter().map(|n| run_named(n)).collect();
    let mut out = Vec::new();
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}
