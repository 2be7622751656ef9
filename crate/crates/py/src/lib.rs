use ::ipmlab as core;
use core::agents::{BehaviorModel, StructureSpec};
use core::mechanisms::OrderPolicy;
use core::simulation::{MechanismKind, Scenario};
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Parse { .. } | core::Error::InvalidParameter(_) => PyValueError::new_err(e.to_string()),
        _ => PyArithmeticError::new_err(e.to_string()),
    }
}

/// A valuation distribution built from a descriptor such as `exp:1`,
/// `uniform:0:1`, `weibull:1:2`, `pareto:2:1` or `ter:100`.
#[pyclass(name = "Distribution", frozen)]
struct PyDistribution {
    inner: core::Distribution,
}

#[pymethods]
impl PyDistribution {
    #[new]
    fn new(descriptor: &str) -> PyResult<Self> {
        Ok(PyDistribution { inner: descriptor.parse().map_err(to_py)? })
    }

    fn cdf(&self, v: f64) -> f64 {
        self.inner.cdf(v)
    }

    fn sf(&self, v: f64) -> f64 {
        self.inner.sf(v)
    }

    fn pdf(&self, v: f64) -> f64 {
        self.inner.pdf(v)
    }

    fn quantile(&self, u: f64) -> f64 {
        self.inner.quantile(u)
    }

    fn mean(&self) -> f64 {
        self.inner.mean()
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    /// The λ at which the family is regular.
    #[getter]
    fn lambda_claimed(&self) -> f64 {
        self.inner.lambda_claimed()
    }

    fn __repr__(&self) -> String {
        format!("Distribution('{}')", self.inner)
    }
}

#[pyfunction]
fn c_of_lambda(lambda: f64) -> f64 {
    core::distributions::c_of_lambda(lambda)
}

#[pyfunction]
fn g_lambda(lambda: f64, x: f64) -> PyResult<f64> {
    core::distributions::g_lambda(lambda, x).map_err(to_py)
}

/// `E[v^(rank, size)]`, the rank-th largest of `size` draws.
#[pyfunction]
fn expected_order_stat(dist: &PyDistribution, rank: usize, size: usize) -> PyResult<f64> {
    core::order_statistics::expected_order_stat(&dist.inner, rank, size).map_err(to_py)
}

/// Posted price for `k` identical items and `n` buyers.
#[pyfunction]
fn ipm_price(dist: &PyDistribution, n: usize, k: usize) -> PyResult<f64> {
    core::mechanisms::ipm_price(&dist.inner, n, k).map_err(to_py)
}

/// Price menu for weighted items as a list of `(eta_j, u_j, r_j)`.
#[pyfunction]
fn build_menu(dist: &PyDistribution, n: usize, etas: Vec<f64>) -> PyResult<Vec<(f64, f64, f64)>> {
    let menu = core::mechanisms::build_menu(&dist.inner, n, &etas).map_err(to_py)?;
    Ok((0..menu.k()).map(|j| (menu.etas[j], menu.us[j], menu.rs[j])).collect())
}

/// `(k+1)`-th price auction with a reserve: returns `(winners, price, revenue)`.
#[pyfunction]
fn kplus1_auction(valuations: Vec<f64>, k: usize, reserve: f64) -> PyResult<(Vec<usize>, f64, f64)> {
    let o = core::mechanisms::kplus1_auction(&valuations, k, reserve).map_err(to_py)?;
    let winners: Vec<usize> = o.allocation.iter().enumerate().filter_map(|(i, a)| a.map(|_| i)).collect();
    let price = if winners.is_empty() { 0.0 } else { o.revenue / winners.len() as f64 };
    Ok((winners, price, o.revenue))
}

#[pyclass(name = "SimulationReport", frozen)]
struct PyReport {
    #[pyo3(get)]
    mean_revenue: f64,
    #[pyo3(get)]
    ci95_revenue: f64,
    #[pyo3(get)]
    mean_welfare: f64,
    #[pyo3(get)]
    analytic_welfare: f64,
    #[pyo3(get)]
    ratio: f64,
    #[pyo3(get)]
    bound: Option<f64>,
    #[pyo3(get)]
    passed: Option<bool>,
    #[pyo3(get)]
    price: Option<f64>,
    #[pyo3(get)]
    csv_row: String,
}

#[pymethods]
impl PyReport {
    fn __repr__(&self) -> String {
        format!("SimulationReport(ratio={}, bound={:?}, passed={:?})", self.ratio, self.bound, self.passed)
    }
}

/// Runs one Monte Carlo scenario. Descriptors match the config file format.
#[pyfunction]
#[pyo3(signature = (dist, n, k, reps, seed, structure="competition", model="surplus", mechanism=None, etas=None, order="random", epsilon=0.0, threads=None))]
#[allow(clippy::too_many_arguments)]
fn run_scenario(
    py: Python<'_>,
    dist: &PyDistribution,
    n: usize,
    k: usize,
    reps: usize,
    seed: u64,
    structure: &str,
    model: &str,
    mechanism: Option<&str>,
    etas: Option<Vec<f64>>,
    order: &str,
    epsilon: f64,
    threads: Option<usize>,
) -> PyResult<PyReport> {
    let mut s = Scenario::new("python", dist.inner, n, k, reps, seed);
    s.structure = structure.parse::<StructureSpec>().map_err(to_py)?;
    s.model = model.parse::<BehaviorModel>().map_err(to_py)?;
    s.order = order.parse::<OrderPolicy>().map_err(to_py)?;
    s.mechanism = match (mechanism, &etas) {
        (Some(m), _) => m.parse::<MechanismKind>().map_err(to_py)?,
        (None, Some(_)) => MechanismKind::HeterogeneousIpm,
        (None, None) => MechanismKind::Ipm,
    };
    s.etas = etas;
    s.epsilon = epsilon;
    let r = py.detach(|| core::simulation::run_scenario_with_threads(&s, threads)).map_err(to_py)?;
    Ok(PyReport {
        mean_revenue: r.mean_revenue,
        ci95_revenue: r.ci95_revenue,
        mean_welfare: r.mean_welfare,
        analytic_welfare: r.analytic_welfare,
        ratio: r.ratio,
        bound: r.bound,
        passed: r.passed,
        price: r.price,
        csv_row: r.csv_row(),
    })
}

/// Runs the numerical checks; returns `(name, worst_margin, at, passed, negative_control)` rows.
#[pyfunction]
#[pyo3(signature = (only=None))]
fn run_checks(py: Python<'_>, only: Option<Vec<String>>) -> PyResult<Vec<(String, f64, String, bool, bool)>> {
    let only = only.unwrap_or_default();
    let results = py.detach(|| core::theory::run_checks(&only)).map_err(to_py)?;
    Ok(results.into_iter().map(|r| (r.name, r.worst_margin, r.at, r.passed, r.negative_control)).collect())
}

/// Compares the claimed uniform optimum of the pricing program with the
/// exact oracle: `(passed, claimed_objective, oracle_objective, oracle_point)`.
#[pyfunction]
#[pyo3(signature = (r, n, lam=0.0))]
fn check_optprog(r: Vec<f64>, n: usize, lam: f64) -> PyResult<(bool, f64, f64, Vec<f64>)> {
    let rep = core::theory::check_optprog(&r, n, lam).map_err(to_py)?;
    Ok((rep.check.passed, rep.analytic_objective, rep.oracle_objective, rep.oracle_point))
}

#[pymodule]
fn ipmlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDistribution>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(c_of_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(g_lambda, m)?)?;
    m.add_function(wrap_pyfunction!(expected_order_stat, m)?)?;
    m.add_function(wrap_pyfunction!(ipm_price, m)?)?;
    m.add_function(wrap_pyfunction!(build_menu, m)?)?;
    m.add_function(wrap_pyfunction!(kplus1_auction, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    m.add_function(wrap_pyfunction!(check_optprog, m)?)?;
    Ok(())
}
