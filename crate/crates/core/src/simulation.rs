//! Monte Carlo engine: draws valuations, runs a mechanism under a demand
//! structure and behaviour model, and compares revenue with welfare.
//!
//! Replicate `r` of a run draws everything from its own stream
//! `(master_seed, r)`, and aggregates are pairwise sums over replicates in
//! index order, so reports are bit-identical for any number of threads.

use crate::agents::{BehaviorModel, StructureSpec};
use crate::distributions::{c_of_lambda, Distribution};
use crate::error::{Error, Result};
use crate::mechanisms::{
    bundle_price_monopsony, bundle_sale, build_menu, ipm_price, kplus1_auction_with_structure, myerson_reserve,
    optimal_item_price, posted_price_sale, sequential_menu_sale, BundleMode, Menu, MechanismOutcome, OrderPolicy,
};
use crate::order_statistics::{expected_order_stat, expected_top_k_sum, expected_weighted_welfare, first_order_stat_sf};
use crate::util::{format_sig, mean_and_variance, pairwise_sum, replicate_rng};
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

/// Environment variable that caps the number of worker threads.
pub const THREADS_ENV: &str = "IPMLAB_THREADS";

/// Minimum replicate count for which a pass/fail verdict is issued.
pub const MIN_REPS_FOR_VERDICT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismKind {
    /// Uniform posted price for identical items.
    Ipm,
    /// Sequential price menu for weighted items.
    HeterogeneousIpm,
    /// `(k+1)`-th price auction with the monopoly reserve.
    KPlus1Auction,
    /// All items as one bundle at the expected top-`k` value.
    BundlePrice,
    /// Revenue-optimal single-item price for every item.
    ItemPrice,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Ipm => "ipm",
            MechanismKind::HeterogeneousIpm => "hetero_ipm",
            MechanismKind::KPlus1Auction => "kplus1",
            MechanismKind::BundlePrice => "bundle",
            MechanismKind::ItemPrice => "item_price",
        })
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ipm" => Ok(MechanismKind::Ipm),
            "hetero_ipm" => Ok(MechanismKind::HeterogeneousIpm),
            "kplus1" => Ok(MechanismKind::KPlus1Auction),
            "bundle" => Ok(MechanismKind::BundlePrice),
            "item_price" => Ok(MechanismKind::ItemPrice),
            _ => Err(Error::parse(s, "expected ipm, hetero_ipm, kplus1, bundle or item_price")),
        }
    }
}

/// One simulated market.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: String,
    pub dist: Distribution,
    pub n: usize,
    /// Number of items; for weighted items this equals `etas.len()`.
    pub k: usize,
    /// Item weights; `None` means identical items.
    pub etas: Option<Vec<f64>>,
    pub structure: StructureSpec,
    pub model: BehaviorModel,
    pub mechanism: MechanismKind,
    pub order: OrderPolicy,
    /// Bundle price discount per item (bundle mechanism only).
    pub epsilon: f64,
    pub reps: usize,
    pub master_seed: u64,
}

impl Scenario {
    /// Homogeneous-item scenario with surplus-maximizing intermediaries under
    /// competition; adjust fields as needed.
    pub fn new(id: impl Into<String>, dist: Distribution, n: usize, k: usize, reps: usize, master_seed: u64) -> Self {
        Scenario {
            id: id.into(),
            dist,
            n,
            k,
            etas: None,
            structure: StructureSpec::Competition,
            model: BehaviorModel::SurplusMax,
            mechanism: MechanismKind::Ipm,
            order: OrderPolicy::Random,
            epsilon: 0.0,
            reps,
            master_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::invalid(format!("scenario `{}`: reps must be at least 1", self.id)));
        }
        if self.k == 0 || self.k > self.n {
            return Err(Error::invalid(format!(
                "scenario `{}`: need 1 <= k <= n, got k = {}, n = {}",
                self.id, self.k, self.n
            )));
        }
        match (&self.etas, self.mechanism) {
            (Some(etas), MechanismKind::HeterogeneousIpm) => {
                crate::mechanisms::validate_etas(etas)?;
                if etas.len() != self.k {
                    return Err(Error::invalid(format!(
                        "scenario `{}`: {} weights for k = {}",
                        self.id,
                        etas.len(),
                        self.k
                    )));
                }
                if self.model == BehaviorModel::Monopolist {
                    return Err(Error::invalid(format!(
                        "scenario `{}`: the menu mechanism needs surplus-maximizing intermediaries",
                        self.id
                    )));
                }
            }
            (None, MechanismKind::HeterogeneousIpm) => {
                return Err(Error::invalid(format!("scenario `{}`: hetero_ipm needs etas", self.id)));
            }
            (Some(_), _) => {
                return Err(Error::invalid(format!("scenario `{}`: etas only apply to hetero_ipm", self.id)));
            }
            (None, _) => {}
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid(format!("scenario `{}`: epsilon must be nonnegative", self.id)));
        }
        self.structure.build(self.n)?;
        Ok(())
    }

    /// Expected optimal welfare `Σ_j η_j E[v^(j,n)]`.
    pub fn analytic_welfare(&self) -> Result<f64> {
        match &self.etas {
            Some(etas) => expected_weighted_welfare(&self.dist, self.n, etas),
            None => expected_top_k_sum(&self.dist, self.n, self.k),
        }
    }

    /// Revenue guarantee as a fraction of welfare, when one applies.
    pub fn bound(&self) -> Option<f64> {
        let lambda = self.dist.lambda_claimed();
        let c = c_of_lambda(lambda);
        let tau = self.model.tau_lower_bound(lambda);
        match self.mechanism {
            MechanismKind::Ipm if self.n.is_multiple_of(self.k) => Some(tau * c * (1.0 - 1.0 / E)),
            MechanismKind::Ipm => Some(tau * c / 2.0 * (1.0 - 1.0 / E)),
            MechanismKind::HeterogeneousIpm => Some((1.0 - (-c / 2.0).exp()) * (1.0 - 1.0 / E)),
            _ => None,
        }
    }
}

/// Aggregate of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub scenario: Scenario,
    /// Posted price, reserve or bundle price; `None` for menus.
    pub price: Option<f64>,
    pub mean_revenue: f64,
    pub ci95_revenue: f64,
    pub mean_welfare: f64,
    pub ci95_welfare: f64,
    pub analytic_welfare: f64,
    pub ratio: f64,
    pub bound: Option<f64>,
    pub passed: Option<bool>,
}

impl SimulationReport {
    /// Half-width of the 95% interval on `ratio`.
    pub fn ci95_ratio(&self) -> f64 {
        self.ci95_revenue / self.analytic_welfare
    }

    pub fn csv_header() -> &'static str {
        "scenario_id,dist,lambda,n,k,structure,model,mechanism,reps,mean_rev,ci95,mean_wel,analytic_wel,ratio,bound,passed"
    }

    pub fn csv_row(&self) -> String {
        let s = &self.scenario;
        let g = |x: f64| format_sig(x, 12);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.id,
            s.dist,
            g(s.dist.lambda_claimed()),
            s.n,
            s.k,
            s.structure,
            s.model,
            s.mechanism,
            s.reps,
            g(self.mean_revenue),
            g(self.ci95_revenue),
            g(self.mean_welfare),
            g(self.analytic_welfare),
            g(self.ratio),
            self.bound.map_or_else(|| "NA".to_string(), g),
            self.passed.map_or_else(|| "NA".to_string(), |p| p.to_string()),
        )
    }

    /// One human-readable line at 6 significant digits.
    pub fn summary_line(&self) -> String {
        let verdict = match self.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        let bound = self.bound.map_or_else(|| "none".to_string(), |b| format_sig(b, 6));
        format!(
            "{verdict} {}: ratio {} ± {} vs bound {bound}",
            self.scenario.id,
            format_sig(self.ratio, 6),
            format_sig(self.ci95_ratio(), 6)
        )
    }
}

/// Writes reports as CSV text with a header line.
pub fn reports_to_csv(reports: &[SimulationReport]) -> String {
    let mut out = String::from(SimulationReport::csv_header());
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Worker count requested through [`THREADS_ENV`], if any.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t: &usize| t >= 1)
}

/// Runs `f` on a pool with `threads` workers, or on the global pool when
/// neither `threads` nor the environment asks for a specific count.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads.or_else(threads_from_env) {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {t} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

enum Prepared {
    Posted(f64),
    Menu(Menu),
    Auction(f64),
    Bundle(f64),
}

fn prepare(s: &Scenario) -> Result<Prepared> {
    Ok(match s.mechanism {
        MechanismKind::Ipm => Prepared::Posted(ipm_price(&s.dist, s.n, s.k)?),
        MechanismKind::ItemPrice => Prepared::Posted(optimal_item_price(&s.dist)?.price),
        MechanismKind::HeterogeneousIpm => {
            Prepared::Menu(build_menu(&s.dist, s.n, s.etas.as_deref().expect("validated"))?)
        }
        MechanismKind::KPlus1Auction => Prepared::Auction(myerson_reserve(&s.dist)?),
        MechanismKind::BundlePrice => {
            let mean = bundle_price_monopsony(&s.dist, s.n, s.k, BundleMode::Mean, 0, 0)?;
            Prepared::Bundle((mean - s.k as f64 * s.epsilon).max(0.0))
        }
    })
}

fn run_replicate(
    s: &Scenario,
    prepared: &Prepared,
    structure: &crate::agents::DemandStructure,
    r: u64,
) -> Result<MechanismOutcome> {
    let mut rng = replicate_rng(s.master_seed, r);
    // Valuations come first so every mechanism and structure sees the same
    // buyers in replicate r.
    let valuations: Vec<f64> = (0..s.n).map(|_| s.dist.quantile(rng.gen::<f64>())).collect();
    match prepared {
        Prepared::Posted(p) => posted_price_sale(&s.dist, *p, s.k, structure, s.model, &valuations, &mut rng),
        Prepared::Menu(menu) => {
            let order = s.order.order(structure, &mut rng);
            Ok(sequential_menu_sale(menu, structure, &valuations, &order))
        }
        Prepared::Auction(reserve) => kplus1_auction_with_structure(&valuations, structure, s.k, *reserve),
        Prepared::Bundle(p) => {
            let order = s.order.order(structure, &mut rng);
            Ok(bundle_sale(*p, s.k, structure, &valuations, &order))
        }
    }
}

/// Runs every replicate of `s` and aggregates revenue and welfare.
pub fn run_scenario(s: &Scenario) -> Result<SimulationReport> {
    run_scenario_with_threads(s, None)
}

pub fn run_scenario_with_threads(s: &Scenario, threads: Option<usize>) -> Result<SimulationReport> {
    s.validate()?;
    let structure = s.structure.build(s.n)?;
    let prepared = prepare(s)?;
    let analytic_welfare = s.analytic_welfare()?;

    let outcomes: Vec<Result<(f64, f64)>> = with_threads(threads, || {
        (0..s.reps as u64)
            .into_par_iter()
            .map(|r| run_replicate(s, &prepared, &structure, r).map(|o| (o.revenue, o.welfare)))
            .collect()
    })?;
    let mut revenues = Vec::with_capacity(s.reps);
    let mut welfares = Vec::with_capacity(s.reps);
    for o in outcomes {
        let (rev, wel) = o?;
        revenues.push(rev);
        welfares.push(wel);
    }
    let n = s.reps as f64;
    let (mean_revenue, var_rev) = mean_and_variance(&revenues);
    let (mean_welfare, var_wel) = mean_and_variance(&welfares);
    let ci95_revenue = 1.96 * (var_rev / n).sqrt();
    let ci95_welfare = 1.96 * (var_wel / n).sqrt();
    let ratio = mean_revenue / analytic_welfare;
    let bound = s.bound();
    let passed = match bound {
        Some(b) if s.reps >= MIN_REPS_FOR_VERDICT => Some(ratio >= b - 2.0 * ci95_revenue / analytic_welfare),
        _ => None,
    };
    let price = match prepared {
        Prepared::Posted(p) | Prepared::Auction(p) | Prepared::Bundle(p) => Some(p),
        Prepared::Menu(_) => None,
    };
    Ok(SimulationReport {
        scenario: s.clone(),
        price,
        mean_revenue,
        ci95_revenue,
        mean_welfare,
        ci95_welfare,
        analytic_welfare,
        ratio,
        bound,
        passed,
    })
}

/// Runs `base` under each structure with common random numbers. For the
/// posted-price mechanism the price must not depend on the structure.
pub fn robustness_sweep(base: &Scenario, structures: &[StructureSpec]) -> Result<Vec<SimulationReport>> {
    if structures.is_empty() {
        return Err(Error::invalid("robustness sweep needs at least one structure"));
    }
    let mut reports = Vec::with_capacity(structures.len());
    for (i, spec) in structures.iter().enumerate() {
        let mut s = base.clone();
        s.structure = *spec;
        s.id = format!("{}/{}", base.id, spec);
        let report = run_scenario(&s)?;
        if base.mechanism == MechanismKind::Ipm && i > 0 {
            let (a, b) = (reports.first().map(|r: &SimulationReport| r.price), report.price);
            if a.flatten().map(f64::to_bits) != b.map(f64::to_bits) {
                return Err(Error::RobustnessViolation(format!(
                    "price {:?} under {} differs from {:?} under {}",
                    b, spec, a, structures[0]
                )));
            }
        }
        reports.push(report);
    }
    Ok(reports)
}

/// Revenue of the best single posted price for one item sold to a monopsony
/// holding `n` buyers, at the price `E[v^(1,n)]`: `E[v^(1,n)] P[v^(1,n) >= E[v^(1,n)]]`.
pub fn monopsony_posted_price_benchmark(d: &Distribution, n: usize) -> Result<f64> {
    let m = expected_order_stat(d, 1, n)?;
    Ok(m * first_order_stat_sf(d, n, m))
}

/// Outcome of the bundling-versus-item-pricing experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnGapResult {
    pub n: usize,
    pub item_revenue: f64,
    pub bundle_price: f64,
    pub bundle_revenue: f64,
    pub acceptance_rate: f64,
    /// Standard error of `acceptance_rate`.
    pub mc_error: f64,
}

impl LnGapResult {
    pub fn gap(&self) -> f64 {
        self.bundle_revenue / self.item_revenue
    }
}

/// Sells `n` items to a monopsony holding `n` buyers with truncated
/// equal-revenue values: item pricing versus one bundle at half the
/// expected total value.
pub fn ln_gap_experiment(n: usize, reps: usize, seed: u64) -> Result<LnGapResult> {
    if (n as f64) <= E.powi(4) {
        return Err(Error::invalid(format!("the experiment needs n > e^4, got {n}")));
    }
    if reps == 0 {
        return Err(Error::invalid("reps must be at least 1"));
    }
    let d = Distribution::truncated_equal_revenue(n as f64)?;
    let nf = n as f64;
    let item_revenue = nf * optimal_item_price(&d)?.revenue;
    let bundle_price = nf * nf * nf.ln() / (2.0 * (nf - 1.0));
    let accepted: Vec<f64> = with_threads(None, || {
        (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = replicate_rng(seed, r);
                let total: f64 = (0..n).map(|_| d.quantile(rng.gen::<f64>())).sum();
                if total >= bundle_price {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    })?;
    let acceptance_rate = pairwise_sum(&accepted) / reps as f64;
    let mc_error = (acceptance_rate * (1.0 - acceptance_rate) / reps as f64).sqrt();
    Ok(LnGapResult {
        n,
        item_revenue,
        bundle_price,
        bundle_revenue: bundle_price * acceptance_rate,
        acceptance_rate,
        mc_error,
    })
}
