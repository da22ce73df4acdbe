//! Python bindings. Instances, states and solutions cross the boundary as
//! wrapper objects; breakdowns and reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sfc_reconfig as core;
use sfc_reconfig::io;
use sfc_reconfig::solver::{SolverMode, SolverOptions};

fn err(e: core::Error) -> PyErr {
    match e {
        core::Error::Infeasible { .. } | core::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(frozen, module = "sfcreconf")]
struct Instance(core::Instance);

#[pymethods]
impl Instance {
    /// Seeded scenario: size is "small", "medium" or "large".
    #[staticmethod]
    #[pyo3(signature = (size, seed=0))]
    fn generate(size: &str, seed: u64) -> PyResult<Self> {
        let size: core::ScenarioSize = size.parse().map_err(err)?;
        core::generate_scenario(size, seed, None).map(Instance).map_err(err)
    }

    /// The two-server fixture used throughout the tests.
    #[staticmethod]
    fn micro() -> Self {
        Instance(core::fixtures::micro_instance())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::load_instance(text).map(Instance).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        io::save_instance(&self.0).map_err(err)
    }

    #[getter]
    fn n_servers(&self) -> usize {
        self.0.servers.len()
    }

    #[getter]
    fn n_sfcs(&self) -> usize {
        self.0.sfcs.len()
    }

    #[getter]
    fn n_flows(&self) -> usize {
        self.0.flows.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(servers={}, sfcs={}, flows={})",
            self.0.servers.len(),
            self.0.sfcs.len(),
            self.0.flows.len()
        )
    }
}

#[pyclass(frozen, module = "sfcreconf")]
struct State(core::NetworkState);

#[pymethods]
impl State {
    /// Spread-out starting deployment for an instance.
    #[staticmethod]
    fn initial(instance: &Instance) -> PyResult<Self> {
        core::initial_state(&instance.0).map(State).map_err(err)
    }

    #[staticmethod]
    fn micro() -> Self {
        State(core::fixtures::micro_state())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        io::load_state(text).map(State).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        io::save_state(&self.0).map_err(err)
    }

    /// Host server of every VNF, SFC-major.
    fn hosts(&self, instance: &Instance) -> PyResult<Vec<usize>> {
        self.0.hosts(&instance.0).map_err(err)
    }
}

#[pyclass(frozen, module = "sfcreconf")]
struct Solution {
    inner: core::ReconfigSolution,
    #[pyo3(get)]
    objective: f64,
    #[pyo3(get)]
    optimal: bool,
    #[pyo3(get)]
    nodes_explored: u64,
    #[pyo3(get)]
    wall_time_s: f64,
}

#[pymethods]
impl Solution {
    #[getter]
    fn cost_np(&self) -> f64 {
        self.inner.breakdown.cost_np
    }

    #[getter]
    fn cost_rec(&self) -> f64 {
        self.inner.breakdown.cost_rec
    }

    #[getter]
    fn migrations(&self) -> usize {
        self.inner.breakdown.migrations
    }

    fn breakdown<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.breakdown)
    }

    /// The target configuration as a state, e.g. to chain reconfigurations.
    fn as_state(&self) -> State {
        State(self.inner.config.clone())
    }

    fn to_json(&self) -> PyResult<String> {
        io::save_solution(&self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(objective={:.6}, cost_np={:.6}, cost_rec={:.6}, migrations={}, optimal={})",
            self.objective,
            self.inner.breakdown.cost_np,
            self.inner.breakdown.cost_rec,
            self.inner.breakdown.migrations,
            self.optimal
        )
    }
}

fn options(solver: &str, k_paths: usize, budget_s: Option<f64>, seed: u64) -> PyResult<SolverOptions> {
    let mode: SolverMode = solver.parse().map_err(err)?;
    Ok(SolverOptions {
        mode,
        k_paths,
        budget_s,
        seed,
        ..SolverOptions::default()
    })
}

/// Solves one alpha; solver is "exact", "anneal" or "brute".
#[pyfunction]
#[pyo3(signature = (instance, state, alpha, solver="exact", k_paths=4, budget_s=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    instance: &Instance,
    state: &State,
    alpha: f64,
    solver: &str,
    k_paths: usize,
    budget_s: Option<f64>,
    seed: u64,
) -> PyResult<Solution> {
    let opts = options(solver, k_paths, budget_s, seed)?;
    let r = py
        .detach(|| core::solver::solve(&instance.0, &state.0, alpha, &opts))
        .map_err(err)?;
    Ok(Solution {
        optimal: r.is_optimal(),
        objective: r.objective,
        nodes_explored: r.nodes_explored,
        wall_time_s: r.wall_time_s,
        inner: r.solution,
    })
}

/// Alpha sweep; returns (results CSV, per-step delta CSV).
#[pyfunction]
#[pyo3(signature = (instance, state, grid="1.0:0.0:0.1", solver="exact", k_paths=4, budget_s=None, seed=0, jobs=0))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    py: Python<'_>,
    instance: &Instance,
    state: &State,
    grid: &str,
    solver: &str,
    k_paths: usize,
    budget_s: Option<f64>,
    seed: u64,
    jobs: usize,
) -> PyResult<(String, String)> {
    let opts = options(solver, k_paths, budget_s, seed)?;
    let grid = core::sweep::parse_grid(grid).map_err(err)?;
    let res = py
        .detach(|| core::sweep::run_sweep(&instance.0, &state.0, &grid, &opts, jobs))
        .map_err(err)?;
    Ok((res.to_csv(), res.delta_csv()))
}

/// Cost breakdown of moving from `state` to `target` at `alpha`.
#[pyfunction]
fn total_cost<'py>(
    py: Python<'py>,
    instance: &Instance,
    state: &State,
    target: &State,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let b = core::total_cost(&instance.0, &state.0, &target.0, alpha).map_err(err)?;
    to_py(py, &b)
}

/// Feasibility check; returns a list of violation dicts (empty when feasible).
#[pyfunction]
#[pyo3(signature = (instance, config, reference=None))]
fn validate<'py>(
    py: Python<'py>,
    instance: &Instance,
    config: &State,
    reference: Option<&State>,
) -> PyResult<Bound<'py, PyAny>> {
    let report = core::validate(&instance.0, &config.0, reference.map(|r| &r.0));
    let out = pyo3::types::PyList::empty(py);
    for v in &report.violations {
        let d = PyDict::new(py);
        d.set_item("kind", v.kind.to_string())?;
        d.set_item("subject", v.subject.to_string())?;
        d.set_item("measured", v.measured)?;
        d.set_item("limit", v.limit)?;
        d.set_item("detail", &v.detail)?;
        out.append(d)?;
    }
    Ok(out.into_any())
}

/// The MILP at `alpha` in LP format.
#[pyfunction]
#[pyo3(signature = (instance, state, alpha, k_paths=4))]
fn export_lp(instance: &Instance, state: &State, alpha: f64, k_paths: usize) -> PyResult<String> {
    let cands = core::CandidateSet::build(&instance.0, &state.0, k_paths).map_err(err)?;
    let model = core::milp::build_milp(&instance.0, &state.0, alpha, &cands).map_err(err)?;
    core::milp::export_lp(&model).map_err(err)
}

#[pymodule]
fn sfcreconf(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_class::<State>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(total_cost, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(export_lp, m)?)?;
    Ok(())
}
