//! Command-line front end.
//!
//! Exit codes: 0 success, 2 parse error, 3 numerical failure, 4 a bound or
//! check failed, 5 unknown check name.

use crate::config::ExperimentConfig;
use crate::distributions::Distribution;
use crate::error::Error;
use crate::mechanisms::{build_menu, ipm_price};
use crate::simulation::{reports_to_csv, run_scenario_with_threads};
use crate::theory::{check_optprog, run_checks, CHECK_NAMES};
use crate::util::format_sig;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_FAILED: i32 = 4;
pub const EXIT_UNKNOWN_CHECK: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "ipmlab", version, about = "Posted-price mechanisms for markets with intermediaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the posted price for identical items, or the price menu for weighted items.
    Price {
        /// Valuation distribution, e.g. exp:1, uniform:0:1, pareto:2:1.
        #[arg(long)]
        dist: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: Option<usize>,
        /// Comma-separated nonincreasing item weights.
        #[arg(long)]
        etas: Option<String>,
    },
    /// Run every scenario in a config file and write the CSV report.
    Simulate {
        config: PathBuf,
        /// Overrides the config's output path; `-` writes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads (defaults to IPMLAB_THREADS, then all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the numerical inequality checks.
    Check {
        /// Comma-separated check names.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
    /// Compare the claimed uniform optimum of the pricing program with an exact oracle.
    Program {
        /// Comma-separated nonincreasing weights.
        #[arg(long)]
        r: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::InvalidParameter(_) => EXIT_PARSE,
        _ => EXIT_NUMERIC,
    }
}

fn parse_floats(text: &str) -> Result<Vec<f64>, Error> {
    text.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| Error::parse(text, "expected comma-separated numbers")))
        .collect()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
            if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Price { dist, n, k, etas } => cmd_price(&dist, n, k, etas.as_deref(), out),
        Command::Simulate { config, output, threads } => cmd_simulate(&config, output.as_deref(), threads, out),
        Command::Check { only } => cmd_check(&only, out, err),
        Command::Program { r, n, lambda } => cmd_program(&r, n, lambda, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn cmd_price(dist: &str, n: usize, k: Option<usize>, etas: Option<&str>, out: &mut dyn Write) -> Result<i32, Error> {
    let d: Distribution = dist.parse()?;
    match (k, etas) {
        (_, Some(etas)) => {
            let menu = build_menu(&d, n, &parse_floats(etas)?)?;
            let _ = write!(out, "{}", menu.to_csv());
        }
        (Some(k), None) => {
            let p = ipm_price(&d, n, k)?;
            let _ = writeln!(out, "p_R = {}", format_sig(p, 6));
        }
        (None, None) => return Err(Error::invalid("give --k for identical items or --etas for weighted items")),
    }
    Ok(EXIT_OK)
}

fn cmd_simulate(
    config_path: &Path,
    output: Option<&Path>,
    threads: Option<usize>,
    out: &mut dyn Write,
) -> Result<i32, Error> {
    let config = ExperimentConfig::load(config_path)?;
    let mut reports = Vec::with_capacity(config.scenarios.len());
    for s in &config.scenarios {
        reports.push(run_scenario_with_threads(s, threads)?);
    }
    let csv = reports_to_csv(&reports);
    let target: Option<PathBuf> = match output {
        Some(p) if p == Path::new("-") => None,
        Some(p) => Some(p.to_path_buf()),
        None => config.output.as_ref().map(|o| {
            let o = PathBuf::from(o);
            if o.is_relative() {
                config_path.parent().unwrap_or(Path::new(".")).join(o)
            } else {
                o
            }
        }),
    };
    match &target {
        Some(path) => std::fs::write(path, &csv)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let _ = write!(out, "{csv}");
        }
    }
    let mut all_passed = true;
    for r in &reports {
        let _ = writeln!(out, "{}", r.summary_line());
        all_passed &= r.passed != Some(false);
    }
    if !config.checks.is_empty() {
        let results = run_checks(&config.checks)?;
        for c in &results {
            let _ = writeln!(out, "check {}", c.row());
            if !c.negative_control {
                all_passed &= c.passed;
            }
        }
    }
    if let Some(path) = target {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(if all_passed { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_check(only: &[String], out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Error> {
    if let Some(bad) = only.iter().find(|n| !CHECK_NAMES.contains(&n.as_str())) {
        let _ = writeln!(err, "error: unknown check `{bad}`; known checks: {}", CHECK_NAMES.join(", "));
        return Ok(EXIT_UNKNOWN_CHECK);
    }
    let results = run_checks(only)?;
    let _ = writeln!(out, "name,worst_margin,at,passed");
    for r in results.iter().filter(|r| !r.negative_control) {
        let _ = writeln!(out, "{}", r.row());
    }
    let negatives: Vec<_> = results.iter().filter(|r| r.negative_control).collect();
    if !negatives.is_empty() {
        let _ = writeln!(out, "# negative controls (expected to fail)");
        for r in &negatives {
            let _ = writeln!(out, "{}", r.row());
        }
    }
    let ok = results.iter().filter(|r| !r.negative_control).all(|r| r.passed);
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

fn cmd_program(r: &str, n: usize, lambda: f64, out: &mut dyn Write) -> Result<i32, Error> {
    let rs = parse_floats(r)?;
    let report = check_optprog(&rs, n, lambda)?;
    let fmt_vec = |v: &[f64]| v.iter().map(|x| format_sig(*x, 6)).collect::<Vec<_>>().join(",");
    let _ = writeln!(out, "claimed_point = {}", fmt_vec(&report.analytic_point));
    let _ = writeln!(out, "claimed_objective = {}", format_sig(report.analytic_objective, 6));
    let _ = writeln!(out, "oracle_point = {}", fmt_vec(&report.oracle_point));
    let _ = writeln!(out, "oracle_objective = {}", format_sig(report.oracle_objective, 6));
    let _ = writeln!(out, "descent_objective = {}", format_sig(report.descent_objective, 6));
    let _ = writeln!(out, "argument_distance = {}", format_sig(report.argument_distance, 6));
    let _ = writeln!(out, "dual_feasible = {}", report.dual_feasible);
    let _ = writeln!(out, "dual_objective = {}", format_sig(report.dual_objective, 6));
    let _ = writeln!(out, "passed = {}", report.check.passed);
    Ok(if report.check.passed { EXIT_OK } else { EXIT_FAILED })
}
