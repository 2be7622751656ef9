//! Demand structures (which intermediary represents which buyer) and the
//! purchase behaviour of intermediaries.

use crate::distributions::{c_of_lambda, inverse_virtual_value, virtual_value, Distribution};
use crate::error::{Error, Result};
use crate::mechanisms::Menu;
use crate::util::replicate_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// Seed used for the random partition in [`canonical_structures`].
pub const CANONICAL_RANDOM_SEED: u64 = 20_180_611;

/// Assignment of `n` buyers to `m` intermediaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandStructure {
    n: usize,
    m: usize,
    partition: Vec<usize>,
    groups: Vec<Vec<usize>>,
}

impl DemandStructure {
    /// Builds a structure from an explicit buyer → intermediary map. Every
    /// intermediary in `0..m` must represent at least one buyer.
    pub fn from_partition(partition: Vec<usize>) -> Result<Self> {
        if partition.is_empty() {
            return Err(Error::invalid("a demand structure needs at least one buyer"));
        }
        let m = partition.iter().max().map_or(0, |&x| x + 1);
        let mut groups = vec![Vec::new(); m];
        for (buyer, &l) in partition.iter().enumerate() {
            groups[l].push(buyer);
        }
        if let Some(empty) = groups.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("intermediary {empty} represents no buyer")));
        }
        Ok(Self { n: partition.len(), m, partition, groups })
    }

    /// Every buyer is its own intermediary.
    pub fn competition(n: usize) -> Result<Self> {
        Self::from_partition((0..n).collect())
    }

    /// A single intermediary represents everyone.
    pub fn monopsony(n: usize) -> Result<Self> {
        Self::from_partition(vec![0; n])
    }

    /// `m` contiguous blocks whose sizes differ by at most one.
    pub fn balanced(n: usize, m: usize) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::invalid(format!("cannot split {n} buyers into {m} groups")));
        }
        Self::from_partition((0..n).map(|i| i * m / n).collect())
    }

    /// A seeded uniformly random surjection onto `m` intermediaries.
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::invalid(format!("cannot split {n} buyers into {m} groups")));
        }
        let mut rng = replicate_rng(seed, 0);
        let mut buyers: Vec<usize> = (0..n).collect();
        buyers.shuffle(&mut rng);
        let mut partition = vec![0; n];
        for (slot, &b) in buyers.iter().enumerate() {
            partition[b] = if slot < m { slot } else { rng.gen_range(0..m) };
        }
        Self::from_partition(partition)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    /// Buyers represented by intermediary `l`, in increasing order.
    pub fn buyers_of(&self, l: usize) -> &[usize] {
        &self.groups[l]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }
}

/// Textual descriptor of a demand structure, independent of `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureSpec {
    Competition,
    Monopsony,
    Balanced(usize),
    Random { m: usize, seed: u64 },
}

impl StructureSpec {
    pub fn build(&self, n: usize) -> Result<DemandStructure> {
        match *self {
            StructureSpec::Competition => DemandStructure::competition(n),
            StructureSpec::Monopsony => DemandStructure::monopsony(n),
            StructureSpec::Balanced(m) => DemandStructure::balanced(n, m),
            StructureSpec::Random { m, seed } => DemandStructure::random(n, m, seed),
        }
    }
}

impl fmt::Display for StructureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureSpec::Competition => write!(f, "competition"),
            StructureSpec::Monopsony => write!(f, "monopsony"),
            StructureSpec::Balanced(m) => write!(f, "balanced:{m}"),
            StructureSpec::Random { m, seed } => write!(f, "random:{m}:{seed}"),
        }
    }
}

impl FromStr for StructureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let count = |p: &str| -> Result<usize> {
            match p.parse::<usize>() {
                Ok(m) if m >= 1 => Ok(m),
                _ => Err(Error::parse(s, format!("`{p}` is not a positive integer"))),
            }
        };
        match parts.as_slice() {
            ["competition"] => Ok(StructureSpec::Competition),
            ["monopsony"] => Ok(StructureSpec::Monopsony),
            ["balanced", m] => Ok(StructureSpec::Balanced(count(m)?)),
            ["random", m, seed] => {
                let seed = seed
                    .parse::<u64>()
                    .map_err(|_| Error::parse(s, format!("`{seed}` is not a seed")))?;
                Ok(StructureSpec::Random { m: count(m)?, seed })
            }
            _ => Err(Error::parse(
                s,
                "expected competition, monopsony, balanced:m or random:m:seed",
            )),
        }
    }
}

/// Descriptors of the four structures every scenario is run against.
pub fn canonical_structure_specs(n: usize) -> Vec<StructureSpec> {
    let mut specs = vec![StructureSpec::Competition, StructureSpec::Monopsony];
    if n >= 2 {
        specs.push(StructureSpec::Balanced(2));
    }
    specs.push(StructureSpec::Random { m: n.div_ceil(2).max(1), seed: CANONICAL_RANDOM_SEED });
    specs
}

/// Competition, monopsony, balanced halves and a seeded random partition.
pub fn canonical_structures(n: usize) -> Result<Vec<DemandStructure>> {
    if n == 0 {
        return Err(Error::invalid("need at least one buyer"));
    }
    canonical_structure_specs(n).iter().map(|s| s.build(n)).collect()
}

/// How an intermediary turns its buyers' values into purchases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BehaviorModel {
    /// Maximizes the total surplus of its buyers.
    SurplusMax,
    /// Keeps the surplus for itself; buys for buyer `i` iff `φ(v_i) >= p`.
    Monopolist,
    /// Nash bargaining: keeps a fraction `α` of the surplus, which does not
    /// change what it buys.
    AlphaBargain(f64),
}

impl BehaviorModel {
    pub fn alpha_bargain(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("bargaining share {alpha} must lie in (0, 1]")));
        }
        Ok(BehaviorModel::AlphaBargain(alpha))
    }

    /// Guaranteed fraction of above-price buyers the model serves for a
    /// λ-regular distribution.
    pub fn tau_lower_bound(&self, lambda: f64) -> f64 {
        match self {
            BehaviorModel::Monopolist => c_of_lambda(lambda),
            _ => 1.0,
        }
    }
}

impl fmt::Display for BehaviorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BehaviorModel::SurplusMax => write!(f, "surplus"),
            BehaviorModel::Monopolist => write!(f, "monopolist"),
            BehaviorModel::AlphaBargain(a) => write!(f, "alpha:{a}"),
        }
    }
}

impl FromStr for BehaviorModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().split_once(':') {
            None if s.trim() == "surplus" => Ok(BehaviorModel::SurplusMax),
            None if s.trim() == "monopolist" => Ok(BehaviorModel::Monopolist),
            Some(("alpha", a)) => {
                let a: f64 = a.parse().map_err(|_| Error::parse(s, format!("`{a}` is not a number")))?;
                BehaviorModel::alpha_bargain(a).map_err(|e| Error::parse(s, e.to_string()))
            }
            _ => Err(Error::parse(s, "expected surplus, monopolist or alpha:x")),
        }
    }
}

/// Number of units an intermediary requests at a uniform per-item price.
pub fn uniform_price_purchases(
    model: BehaviorModel,
    d: &Distribution,
    price: f64,
    valuations: &[f64],
) -> Result<usize> {
    if !(price >= 0.0) {
        return Err(Error::invalid(format!("price {price} must be nonnegative")));
    }
    match model {
        BehaviorModel::SurplusMax | BehaviorModel::AlphaBargain(_) => {
            Ok(valuations.iter().filter(|&&v| v >= price).count())
        }
        BehaviorModel::Monopolist => {
            let mut count = 0;
            for &v in valuations {
                if virtual_value(d, v)? >= price {
                    count += 1;
                }
            }
            Ok(count)
        }
    }
}

/// Smallest valuation at which `model` buys for a buyer at `price`.
///
/// Counting values at or above this threshold gives the same answer as
/// [`uniform_price_purchases`] without evaluating `φ` per buyer.
pub fn purchase_threshold(model: BehaviorModel, d: &Distribution, price: f64) -> Result<f64> {
    match model {
        BehaviorModel::SurplusMax | BehaviorModel::AlphaBargain(_) => Ok(price),
        BehaviorModel::Monopolist => {
            let (lo, hi) = d.support();
            match inverse_virtual_value(d, price) {
                Ok(v) => Ok(v),
                Err(Error::OutOfRange { lo: phi_lo, .. }) if price <= phi_lo => Ok(lo),
                Err(Error::OutOfRange { .. }) => Ok(hi),
                Err(e) => Err(e),
            }
        }
    }
}

/// Monte Carlo and closed-form estimates of the purchase probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimate {
    /// Smallest empirical purchase frequency over the price grid.
    pub empirical: f64,
    /// Closed-form purchase probability at the same grid point.
    pub analytic: f64,
    /// Smallest closed-form purchase probability over the grid.
    pub analytic_min: f64,
    pub standard_error: f64,
    pub worst_price: f64,
}

/// Estimates `min_p P[model buys for a buyer | v >= p]` over `price_grid`.
///
/// Buyers are drawn from the conditional law by inversion of the survival
/// function, so every draw counts.
pub fn estimate_tau(
    model: BehaviorModel,
    d: &Distribution,
    price_grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<TauEstimate> {
    if reps < 100_000 {
        return Err(Error::invalid(format!("estimate_tau needs at least 1e5 replicates, got {reps}")));
    }
    if price_grid.is_empty() {
        return Err(Error::invalid("empty price grid"));
    }
    let mut worst: Option<TauEstimate> = None;
    let mut analytic_min = f64::INFINITY;
    for (g, &p) in price_grid.iter().enumerate() {
        let sf_p = d.sf(p);
        if sf_p <= 0.0 {
            return Err(Error::TailDegenerate(p));
        }
        let threshold = purchase_threshold(model, d, p)?;
        let analytic = if threshold <= p { 1.0 } else { d.sf(threshold) / sf_p };
        analytic_min = analytic_min.min(analytic);
        let mut rng = replicate_rng(seed, g as u64);
        let mut bought = 0usize;
        for _ in 0..reps {
            let u: f64 = rng.gen();
            // v | v >= p; the clamp guards against rounding just below p.
            let v = d.quantile_sf((1.0 - u) * sf_p).max(p);
            if v >= threshold {
                bought += 1;
            }
        }
        let freq = bought as f64 / reps as f64;
        if worst.is_none_or(|w| freq < w.empirical) {
            let standard_error = (freq * (1.0 - freq) / reps as f64).sqrt();
            worst = Some(TauEstimate { empirical: freq, analytic, analytic_min, standard_error, worst_price: p });
        }
    }
    let mut worst = worst.expect("non-empty grid");
    worst.analytic_min = analytic_min;
    Ok(worst)
}

/// An intermediary's optimal purchase from a menu.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuPurchase {
    /// Purchased item indices (0-based), increasing.
    pub items: Vec<usize>,
    /// `(buyer position in the valuation slice, item index)` pairs.
    pub assignment: Vec<(usize, usize)>,
    pub surplus: f64,
}

const TIE_TOL: f64 = 1e-12;
const ENUMERATION_LIMIT: usize = 8;

/// Surplus-maximizing purchase of items from `menu` restricted to `available`.
///
/// The objective is `Σ v_i η_{j(i)} - Σ_{j ∈ S} r_j` over purchase sets `S`
/// and injective assignments of `S` to buyers. Ties go to larger sets, then
/// to the lexicographically smallest set.
pub fn surplus_max_menu_purchase(menu: &Menu, available: &[bool], valuations: &[f64]) -> MenuPurchase {
    let items: Vec<usize> = (0..menu.k()).filter(|&j| available.get(j).copied().unwrap_or(false)).collect();
    if items.len() <= ENUMERATION_LIMIT {
        purchase_by_enumeration(menu, &items, valuations)
    } else {
        purchase_by_matching(menu, &items, valuations)
    }
}

// Buyers sorted by decreasing value (stable on position).
fn ranked_buyers(valuations: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..valuations.len()).collect();
    order.sort_by(|&a, &b| valuations[b].total_cmp(&valuations[a]));
    order
}

// For a fixed purchase set, pairing the highest values with the largest
// weights is optimal (rearrangement inequality).
fn evaluate_set(menu: &Menu, set: &[usize], ranked: &[usize], valuations: &[f64]) -> f64 {
    let mut by_weight = set.to_vec();
    by_weight.sort_by(|&a, &b| menu.etas[b].total_cmp(&menu.etas[a]).then(a.cmp(&b)));
    by_weight
        .iter()
        .zip(ranked)
        .map(|(&j, &i)| valuations[i] * menu.etas[j] - menu.rs[j])
        .sum()
}

fn assign(menu: &Menu, set: &[usize], ranked: &[usize]) -> Vec<(usize, usize)> {
    let mut by_weight = set.to_vec();
    by_weight.sort_by(|&a, &b| menu.etas[b].total_cmp(&menu.etas[a]).then(a.cmp(&b)));
    ranked.iter().copied().zip(by_weight).collect()
}

fn better(candidate: (f64, &[usize]), incumbent: (f64, &[usize])) -> bool {
    let (cs, cset) = candidate;
    let (is, iset) = incumbent;
    let tol = TIE_TOL * cs.abs().max(is.abs()).max(1.0);
    if cs > is + tol {
        return true;
    }
    if cs < is - tol {
        return false;
    }
    cset.len() > iset.len() || (cset.len() == iset.len() && cset < iset)
}

fn purchase_by_enumeration(menu: &Menu, items: &[usize], valuations: &[f64]) -> MenuPurchase {
    let ranked = ranked_buyers(valuations);
    let mut best_set: Vec<usize> = Vec::new();
    let mut best_surplus = 0.0;
    for mask in 1u32..(1u32 << items.len()) {
        if mask.count_ones() as usize > ranked.len() {
            continue;
        }
        let set: Vec<usize> = (0..items.len()).filter(|b| mask >> b & 1 == 1).map(|b| items[b]).collect();
        let s = evaluate_set(menu, &set, &ranked, valuations);
        if better((s, &set), (best_surplus, &best_set)) {
            best_surplus = s;
            best_set = set;
        }
    }
    let assignment = assign(menu, &best_set, &ranked);
    MenuPurchase { items: best_set, assignment, surplus: best_surplus }
}

fn purchase_by_matching(menu: &Menu, items: &[usize], valuations: &[f64]) -> MenuPurchase {
    // Only the top |items| buyers can matter: swapping a matched buyer for an
    // unmatched one with a higher value never lowers the surplus.
    let ranked = ranked_buyers(valuations);
    let buyers: Vec<usize> = ranked.iter().copied().take(items.len()).collect();
    let size = items.len().max(buyers.len());
    // Cost matrix for minimization; padded rows and columns cost nothing.
    let mut cost = vec![vec![0.0; size]; size];
    for (r, &i) in buyers.iter().enumerate() {
        for (c, &j) in items.iter().enumerate() {
            let net = valuations[i] * menu.etas[j] - menu.rs[j];
            cost[r][c] = -net.max(0.0);
        }
    }
    let col_of_row = hungarian(&cost);
    let mut assignment = Vec::new();
    let mut surplus = 0.0;
    for (r, &i) in buyers.iter().enumerate() {
        let c = col_of_row[r];
        if c < items.len() {
            let j = items[c];
            let net = valuations[i] * menu.etas[j] - menu.rs[j];
            if net >= -TIE_TOL {
                assignment.push((i, j));
                surplus += net;
            }
        }
    }
    let mut bought: Vec<usize> = assignment.iter().map(|&(_, j)| j).collect();
    bought.sort_unstable();
    MenuPurchase { items: bought, assignment, surplus }
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials). Returns the column assigned to each row.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of_row = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            col_of_row[p[j] - 1] = j - 1;
        }
    }
    col_of_row
}

/// Demand set of each buyer: the first item `j` with `v >= u_j`.
pub fn demand_set(menu: &Menu, valuations: &[f64]) -> Vec<Option<usize>> {
    valuations.iter().map(|&v| menu.us.iter().position(|&u| v >= u)).collect()
}
