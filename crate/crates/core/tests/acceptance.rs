//! End-to-end acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance --release`. The process exits
//! nonzero when a criterion fails that is not listed in `KNOWN_FAILURES`.

use ipmlab::agents::{canonical_structure_specs, estimate_tau, BehaviorModel, StructureSpec};
use ipmlab::distributions::c_of_lambda;
use ipmlab::mechanisms::{myerson_reserve, OrderPolicy};
use ipmlab::simulation::{
    ln_gap_experiment, monopsony_posted_price_benchmark, reports_to_csv, run_scenario_with_threads, LnGapResult,
    MechanismKind, Scenario, SimulationReport,
};
use ipmlab::theory::{
    check_hypergeometric, check_lamb_aux_boundary, check_optprog, lamb_aux_boundary, optprog_random_instances,
    run_checks,
};
use ipmlab::Distribution;
use std::f64::consts::E;
use std::time::{Duration, Instant};

/// The pricing-program optimality claim does not hold: the claimed uniform point is not
/// optimal on a sizeable share of random instances (e.g. r = (1, 1), n = 10).
const KNOWN_FAILURES: [usize; 1] = [6];

const SEED: u64 = 20_180_611;
/// Thread count of the primary runs; criterion 10 repeats them with others.
const PRIMARY_THREADS: usize = 2;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome { passed, detail: detail.into() }
    }
}

fn exp1() -> Distribution {
    Distribution::exponential(1.0).unwrap()
}

fn run_all(scenarios: &[Scenario], threads: usize) -> Vec<SimulationReport> {
    scenarios.iter().map(|s| run_scenario_with_threads(s, Some(threads)).unwrap()).collect()
}

fn homogeneous_scenarios(d: Distribution, n: usize, k: usize, model: BehaviorModel, reps: usize) -> Vec<Scenario> {
    canonical_structure_specs(n)
        .into_iter()
        .map(|spec| {
            let mut s = Scenario::new(format!("{d}-n{n}-k{k}-{spec}-{model}"), d, n, k, reps, SEED);
            s.structure = spec;
            s.model = model;
            s
        })
        .collect()
}

fn hetero_scenarios(order: OrderPolicy) -> Vec<Scenario> {
    canonical_structure_specs(6)
        .into_iter()
        .map(|spec| {
            let mut s = Scenario::new(format!("hetero-{spec}-{order}"), exp1(), 6, 3, 100_000, SEED);
            s.etas = Some(vec![1.0, 0.5, 0.25]);
            s.mechanism = MechanismKind::HeterogeneousIpm;
            s.structure = spec;
            s.order = order;
            s
        })
        .collect()
}

fn bound_lines(reports: &[SimulationReport], bound: f64) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for r in reports {
        let slack = r.ratio - (bound - 2.0 * r.ci95_ratio());
        ok &= slack >= 0.0 && r.passed == Some(true) && r.bound.map_or(false, |b| (b - bound).abs() < 1e-12);
        parts.push(format!("{}={:.5}", r.scenario.structure, r.ratio));
    }
    (ok, format!("bound {bound:.5}; ratios {}", parts.join(" ")))
}

fn within(elapsed: Duration, limit: u64) -> bool {
    elapsed <= Duration::from_secs(limit)
}

fn criterion_1(runs: &mut Vec<(usize, Vec<Scenario>)>) -> Outcome {
    let scenarios = homogeneous_scenarios(exp1(), 6, 3, BehaviorModel::SurplusMax, 1_000_000);
    let start = Instant::now();
    let reports = run_all(&scenarios, PRIMARY_THREADS);
    let elapsed = start.elapsed();
    let (ok, detail) = bound_lines(&reports, c_of_lambda(0.0) * (1.0 - 1.0 / E));
    runs.push((1, scenarios));
    Outcome::new(ok && within(elapsed, 60), format!("{detail}; {:.1}s", elapsed.as_secs_f64()))
}

fn criterion_2(runs: &mut Vec<(usize, Vec<Scenario>)>) -> Outcome {
    let d = exp1();
    let scenarios = homogeneous_scenarios(d, 6, 3, BehaviorModel::Monopolist, 1_000_000);
    let start = Instant::now();
    let reports = run_all(&scenarios, PRIMARY_THREADS);
    let tau = estimate_tau(BehaviorModel::Monopolist, &d, &[0.5, 1.0, 2.0], 2_000_000, SEED).unwrap();
    let elapsed = start.elapsed();
    let (ok, detail) = bound_lines(&reports, (1.0 / E) * c_of_lambda(0.0) * (1.0 - 1.0 / E));
    let tau_ok = (tau.empirical - 1.0 / E).abs() <= 1e-3 && (tau.analytic_min - 1.0 / E).abs() <= 1e-12;
    runs.push((2, scenarios));
    Outcome::new(
        ok && tau_ok && within(elapsed, 60),
        format!("{detail}; tau {:.5} (1/e = {:.5}); {:.1}s", tau.empirical, 1.0 / E, elapsed.as_secs_f64()),
    )
}

fn criterion_3(runs: &mut Vec<(usize, Vec<Scenario>)>) -> Outcome {
    let d = Distribution::pareto(2.0, 1.0).unwrap();
    let scenarios = homogeneous_scenarios(d, 8, 4, BehaviorModel::SurplusMax, 1_000_000);
    let reports = run_all(&scenarios, PRIMARY_THREADS);
    let (ok, detail) = bound_lines(&reports, c_of_lambda(0.5) * (1.0 - 1.0 / E));
    let grid = [1.0, 1.5, 2.0, 4.0, 10.0];
    let tau = estimate_tau(BehaviorModel::Monopolist, &d, &grid, 1_000_000, SEED).unwrap();
    let tau_ok = (tau.analytic_min - 0.25).abs() <= 1e-12 && (tau.empirical - 0.25).abs() <= 4.0 * tau.standard_error;
    runs.push((3, scenarios));
    Outcome::new(ok && tau_ok, format!("{detail}; tau closed form {} measured {:.5}", tau.analytic_min, tau.empirical))
}

fn criterion_4(runs: &mut Vec<(usize, Vec<Scenario>)>) -> Outcome {
    let bound = (1.0 - (-c_of_lambda(0.0) / 2.0).exp()) * (1.0 - 1.0 / E);
    let scenarios = hetero_scenarios(OrderPolicy::Random);
    let start = Instant::now();
    let reports = run_all(&scenarios, PRIMARY_THREADS);
    let elapsed = start.elapsed();
    let (ok, detail) = bound_lines(&reports, bound);
    // The adversarial-looking order is reported alongside.
    let reverse = run_all(&hetero_scenarios(OrderPolicy::ReverseSize), PRIMARY_THREADS);
    let (reverse_ok, reverse_detail) = bound_lines(&reverse, bound);
    runs.push((4, scenarios));
    Outcome::new(
        ok && within(elapsed, 120),
        format!(
            "{detail}; {:.1}s; reverse_size {} ({reverse_detail})",
            elapsed.as_secs_f64(),
            if reverse_ok { "ok" } else { "below bound" }
        ),
    )
}

fn criterion_5() -> Outcome {
    let r = check_hypergeometric(24);
    Outcome::new(r.passed && r.worst_margin >= 0.0 && r.tolerance == 0.0, format!("worst slack {} at {}", r.worst_margin, r.at))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let instances = optprog_random_instances(50, SEED);
    let mut failures = Vec::new();
    for (rs, n, lambda) in &instances {
        assert!(rs.len() <= 5);
        let report = check_optprog(rs, *n, *lambda).unwrap();
        let objective_ok = report.oracle_objective - report.analytic_objective <= 1e-4;
        let argument_ok = report.argument_distance <= 1e-3;
        if !(objective_ok && argument_ok) {
            failures.push(report);
        }
    }
    let elapsed = start.elapsed();
    let worst = failures
        .iter()
        .max_by(|a, b| {
            (a.oracle_objective - a.analytic_objective).total_cmp(&(b.oracle_objective - b.analytic_objective))
        })
        .map(|r| format!("; worst {} (oracle {:.6} vs claimed {:.6})", r.check.name, r.oracle_objective, r.analytic_objective))
        .unwrap_or_default();
    Outcome::new(
        failures.is_empty() && within(elapsed, 30),
        format!("{}/{} instances off the claimed optimum{worst}; {:.1}s", failures.len(), instances.len(), elapsed.as_secs_f64()),
    )
}

fn criterion_7() -> Outcome {
    let names: Vec<String> =
        ["regularity", "fact1", "lamb_aux", "facts23", "claim_cl1"].iter().map(|s| s.to_string()).collect();
    let results = run_checks(&names).unwrap();
    let suites_ok = results.iter().filter(|r| !r.negative_control).all(|r| r.passed);
    let negatives: Vec<_> = results.iter().filter(|r| r.negative_control).collect();
    let negatives_ok = !negatives.is_empty() && negatives.iter().all(|r| !r.passed);
    let boundary = check_lamb_aux_boundary(8, 1e-6).unwrap();
    let raw_ok = (2..=3).all(|n| {
        let b = lamb_aux_boundary(n, 1e-6);
        (b.raw - b.limit).abs() <= 1e-6
    });
    let failing: Vec<&str> =
        results.iter().filter(|r| !r.negative_control && !r.passed).map(|r| r.name.as_str()).collect();
    Outcome::new(
        suites_ok && negatives_ok && boundary.passed && raw_ok,
        format!(
            "{} grid checks, failing: [{}]; {} negative controls all fail: {negatives_ok}; boundary worst {:.2e} at {}",
            results.len() - negatives.len(),
            failing.join(" "),
            negatives.len(),
            -boundary.worst_margin,
            boundary.at
        ),
    )
}

fn ln_gap_runs(threads: usize) -> Vec<LnGapResult> {
    [60usize, 100, 400]
        .iter()
        .map(|&n| {
            ipmlab::simulation::with_threads(Some(threads), || ln_gap_experiment(n, 100_000, SEED)).unwrap().unwrap()
        })
        .collect()
}

fn ln_gap_csv(results: &[LnGapResult]) -> String {
    results
        .iter()
        .map(|r| {
            format!("{},{:?},{:?},{:?},{:?},{:?}\n", r.n, r.item_revenue, r.bundle_price, r.bundle_revenue, r.acceptance_rate, r.mc_error)
        })
        .collect()
}

fn criterion_8(csvs: &mut Vec<(usize, String)>) -> Outcome {
    let start = Instant::now();
    let results = ln_gap_runs(PRIMARY_THREADS);
    let elapsed = start.elapsed();
    let at100 = results[1];
    let acceptance_ok = results.iter().all(|r| r.acceptance_rate >= 0.75 - 2.0 * r.mc_error);
    let price_ok = (at100.bundle_price - 232.6).abs() < 0.05;
    let gap_ok = at100.gap() > 1.7;
    let monotone = results.windows(2).all(|w| w[1].gap() > w[0].gap());
    csvs.push((8, ln_gap_csv(&results)));
    Outcome::new(
        acceptance_ok && price_ok && gap_ok && monotone && within(elapsed, 60),
        format!(
            "n=100: price {:.2}, acceptance {:.4} ± {:.4}, bundle {:.2} vs item {:.2}; gaps {}; {:.1}s",
            at100.bundle_price,
            at100.acceptance_rate,
            at100.mc_error,
            at100.bundle_revenue,
            at100.item_revenue,
            results.iter().map(|r| format!("{:.3}", r.gap())).collect::<Vec<_>>().join(" < "),
            elapsed.as_secs_f64()
        ),
    )
}

fn robustness_scenarios() -> Vec<Scenario> {
    let mut scenarios: Vec<Scenario> = [16usize, 64, 256]
        .iter()
        .map(|&n| {
            let mut s = Scenario::new(format!("kplus1-monopsony-n{n}"), exp1(), n, 1, 100_000, SEED);
            s.structure = StructureSpec::Monopsony;
            s.mechanism = MechanismKind::KPlus1Auction;
            s
        })
        .collect();
    let u = Distribution::uniform(0.0, 1.0).unwrap();
    let mut bundle = Scenario::new("bundle-competition", u, 32, 32, 100_000, SEED);
    bundle.mechanism = MechanismKind::BundlePrice;
    bundle.epsilon = 0.05;
    scenarios.push(bundle);
    scenarios.push(Scenario::new("ipm-competition", u, 32, 32, 100_000, SEED));
    scenarios
}

fn criterion_9(runs: &mut Vec<(usize, Vec<Scenario>)>) -> Outcome {
    let scenarios = robustness_scenarios();
    let reports = run_all(&scenarios, PRIMARY_THREADS);
    let reserve = myerson_reserve(&exp1()).unwrap();
    let mut auction_ok = (reserve - 1.0).abs() < 1e-9;
    let mut shares = Vec::new();
    let mut benchmarks = Vec::new();
    for r in &reports[..3] {
        let benchmark = monopsony_posted_price_benchmark(&exp1(), r.scenario.n).unwrap();
        auction_ok &= r.mean_revenue <= reserve + 1e-12;
        benchmarks.push(benchmark);
        shares.push(r.mean_revenue / benchmark);
    }
    let diverging = benchmarks.windows(2).all(|w| w[1] > w[0]) && shares.windows(2).all(|w| w[1] < w[0]);
    let (bundle, competition) = (&reports[3], &reports[4]);
    let bundle_share = bundle.mean_revenue / competition.mean_revenue;
    runs.push((9, scenarios));
    Outcome::new(
        auction_ok && diverging && bundle_share < 0.01,
        format!(
            "auction revenue {} vs benchmark {}; bundle {:.4} vs competition {:.4} ({:.3}%)",
            reports[..3].iter().map(|r| format!("{:.4}", r.mean_revenue)).collect::<Vec<_>>().join("/"),
            benchmarks.iter().map(|b| format!("{b:.4}")).collect::<Vec<_>>().join("/"),
            bundle.mean_revenue,
            competition.mean_revenue,
            100.0 * bundle_share
        ),
    )
}

fn criterion_10(runs: &[(usize, Vec<Scenario>)], csvs: &[(usize, String)]) -> Outcome {
    let mut mismatches = Vec::new();
    for threads in [1usize, 3] {
        for (criterion, scenarios) in runs {
            let primary = reports_to_csv(&run_all(scenarios, PRIMARY_THREADS));
            if reports_to_csv(&run_all(scenarios, threads)) != primary {
                mismatches.push(format!("{criterion}@{threads}"));
            }
        }
        for (criterion, csv) in csvs {
            if &ln_gap_csv(&ln_gap_runs(threads)) != csv {
                mismatches.push(format!("{criterion}@{threads}"));
            }
        }
    }
    Outcome::new(
        mismatches.is_empty(),
        format!("thread counts 1/{PRIMARY_THREADS}/3 compared; mismatches: [{}]", mismatches.join(" ")),
    )
}

fn main() {
    let mut runs = Vec::new();
    let mut csvs = Vec::new();
    let outcomes = vec![
        (1, criterion_1(&mut runs)),
        (2, criterion_2(&mut runs)),
        (3, criterion_3(&mut runs)),
        (4, criterion_4(&mut runs)),
        (5, criterion_5()),
        (6, criterion_6()),
        (7, criterion_7()),
        (8, criterion_8(&mut csvs)),
        (9, criterion_9(&mut runs)),
    ];
    let mut outcomes = outcomes;
    outcomes.push((10, criterion_10(&runs, &csvs)));
    let mut unexpected = Vec::new();
    for (i, o) in &outcomes {
        let verdict = if o.passed { "PASS" } else { "FAIL" };
        let note = if !o.passed && KNOWN_FAILURES.contains(i) { " (known failure)" } else { "" };
        println!("{verdict} criterion {i}: {}{note}", o.detail);
        if !o.passed && !KNOWN_FAILURES.contains(i) {
            unexpected.push(*i);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
