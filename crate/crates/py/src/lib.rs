//! Python bindings: `import karma_economy`.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use karma_core::baselines::{max_eff_bound, psi_index, random_long_run_reward};
use karma_core::simulator::{self, KarmaPolicy};
use karma_core::{EquilibriumResult, GameConfig, KarmaError, MechanismKind, MetricsReport, Outcome};

fn to_py(e: KarmaError) -> PyErr {
    match e {
        KarmaError::Io(e) => PyOSError::new_err(e.to_string()),
        KarmaError::Solver { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Game, solver and experiment parameters.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
pub struct PyConfig {
    inner: GameConfig,
}

#[pymethods]
impl PyConfig {
    /// Parses flat `key = value` text; no text gives the defaults.
    #[new]
    #[pyo3(signature = (text = None))]
    fn new(text: Option<&str>) -> PyResult<Self> {
        let inner = match text {
            Some(t) => GameConfig::from_text(t).map_err(to_py)?,
            None => GameConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: GameConfig::load(path).map_err(to_py)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(to_py)
    }

    #[getter]
    fn urgency_levels(&self) -> Vec<u32> {
        self.inner.urgency_levels.clone()
    }
    #[setter]
    fn set_urgency_levels(&mut self, v: Vec<u32>) {
        self.inner.urgency_levels = v;
    }
    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }
    #[setter]
    fn set_epsilon(&mut self, v: f64) {
        self.inner.epsilon = v;
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[setter]
    fn set_alpha(&mut self, v: f64) {
        self.inner.alpha = v;
    }
    #[getter]
    fn k_bar(&self) -> usize {
        self.inner.k_bar
    }
    #[setter]
    fn set_k_bar(&mut self, v: usize) {
        self.inner.k_bar = v;
    }
    #[getter]
    fn k_max(&self) -> usize {
        self.inner.k_max
    }
    #[setter]
    fn set_k_max(&mut self, v: usize) {
        self.inner.k_max = v;
    }
    #[getter]
    fn n_agents(&self) -> usize {
        self.inner.n_agents
    }
    #[setter]
    fn set_n_agents(&mut self, v: usize) {
        self.inner.n_agents = v;
    }
    #[getter]
    fn n_rounds(&self) -> usize {
        self.inner.n_rounds
    }
    #[setter]
    fn set_n_rounds(&mut self, v: usize) {
        self.inner.n_rounds = v;
    }
    #[getter]
    fn burn_in(&self) -> usize {
        self.inner.burn_in
    }
    #[setter]
    fn set_burn_in(&mut self, v: usize) {
        self.inner.burn_in = v;
    }
    #[getter]
    fn rng_seed(&self) -> u64 {
        self.inner.rng_seed
    }
    #[setter]
    fn set_rng_seed(&mut self, v: u64) {
        self.inner.rng_seed = v;
    }
    #[getter]
    fn max_outer_iters(&self) -> usize {
        self.inner.solver.max_outer_iters
    }
    #[setter]
    fn set_max_outer_iters(&mut self, v: usize) {
        self.inner.solver.max_outer_iters = v;
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(levels={:?}, epsilon={}, alpha={}, k_bar={}, k_max={}, n_agents={}, seed={})",
            self.inner.urgency_levels,
            self.inner.epsilon,
            self.inner.alpha,
            self.inner.k_bar,
            self.inner.k_max,
            self.inner.n_agents,
            self.inner.rng_seed
        )
    }
}

/// A solved stationary Nash equilibrium.
#[pyclass(name = "Equilibrium", frozen)]
pub struct PyEquilibrium {
    inner: EquilibriumResult,
}

#[pymethods]
impl PyEquilibrium {
    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }
    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }
    #[getter]
    fn exploitability(&self) -> f64 {
        self.inner.final_record().exploitability
    }
    #[getter]
    fn stationarity_residual(&self) -> f64 {
        self.inner.final_record().stationarity_residual
    }
    #[getter]
    fn mean_karma(&self) -> f64 {
        self.inner.social.mean_karma()
    }
    #[getter]
    fn average_payment(&self) -> f64 {
        self.inner.p_bar
    }
    #[getter]
    fn k_max(&self) -> usize {
        self.inner.social.k_max()
    }
    #[getter]
    fn n_levels(&self) -> usize {
        self.inner.social.n_levels()
    }

    /// `d[u][k]`, indexed by urgency index then karma.
    fn distribution(&self) -> Vec<Vec<f64>> {
        let s = &self.inner.social;
        (0..s.n_levels())
            .map(|u| (0..=s.k_max()).map(|k| s.mass(u, k)).collect())
            .collect()
    }

    /// Bid probabilities at `(u, k)`, length `k + 1`.
    fn policy(&self, u: usize, k: usize) -> PyResult<Vec<f64>> {
        self.check(u, k)?;
        Ok(self.inner.social.bids(u, k).to_vec())
    }

    fn expected_bid(&self, u: usize, k: usize) -> PyResult<f64> {
        self.check(u, k)?;
        Ok(self.inner.social.expected_bid(u, k))
    }

    /// `V[u][k]`.
    fn values(&self) -> Vec<Vec<f64>> {
        let s = &self.inner.social;
        (0..s.n_levels())
            .map(|u| (0..=s.k_max()).map(|k| self.inner.values.v[s.index(u, k)]).collect())
            .collect()
    }

    /// `(iteration, stationarity_residual, exploitability, temperature, mean_karma)` per iteration.
    fn residuals(&self) -> Vec<(usize, f64, f64, f64, f64)> {
        self.inner
            .residuals
            .iter()
            .map(|r| {
                (
                    r.iteration,
                    r.stationarity_residual,
                    r.exploitability,
                    r.temperature,
                    r.mean_karma,
                )
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Equilibrium(converged={}, iterations={}, exploitability={:e}, mean_karma={})",
            self.inner.converged,
            self.inner.iterations,
            self.inner.final_record().exploitability,
            self.inner.social.mean_karma()
        )
    }
}

impl PyEquilibrium {
    fn check(&self, u: usize, k: usize) -> PyResult<()> {
        let s = &self.inner.social;
        if u >= s.n_levels() || k > s.k_max() {
            return Err(PyValueError::new_err(format!("state ({u}, {k}) out of range")));
        }
        Ok(())
    }
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mechanism", &r.mechanism)?;
    d.set_item("seed", r.seed)?;
    d.set_item("r_bar", r.r_bar)?;
    d.set_item("beta", r.beta)?;
    d.set_item("per_agent_average", &r.per_agent_average)?;
    d.set_item("urgency_marginal", &r.urgency_marginal)?;
    d.set_item("running_r_bar", &r.running_r_bar)?;
    d.set_item("karma_totals", &r.karma_totals)?;
    Ok(d)
}

/// Computes the stationary Nash equilibrium.
#[pyfunction]
fn solve(py: Python<'_>, config: &PyConfig) -> PyResult<PyEquilibrium> {
    let config = config.inner.clone();
    let inner = py.detach(move || karma_core::solve_sne(&config, None)).map_err(to_py)?;
    Ok(PyEquilibrium { inner })
}

/// Simulates one mechanism: `karma`, `random`, `turn` or `greedy_urgency`.
/// `karma` needs a converged equilibrium.
#[pyfunction]
#[pyo3(signature = (config, mechanism, equilibrium = None))]
fn simulate<'py>(
    py: Python<'py>,
    config: &PyConfig,
    mechanism: &str,
    equilibrium: Option<&PyEquilibrium>,
) -> PyResult<Bound<'py, PyDict>> {
    let mechanism = match mechanism {
        "karma" => {
            let eq = equilibrium.ok_or_else(|| PyValueError::new_err("karma needs an equilibrium"))?;
            MechanismKind::Karma(KarmaPolicy::from_equilibrium(&eq.inner).map_err(to_py)?)
        }
        "random" => MechanismKind::Random,
        "turn" => MechanismKind::Turn,
        "greedy_urgency" => MechanismKind::GreedyUrgency,
        other => return Err(PyValueError::new_err(format!("unknown mechanism `{other}`"))),
    };
    let config = config.inner.clone();
    let report = py
        .detach(move || simulator::run_experiment(&config, &mechanism))
        .map_err(to_py)?;
    report_dict(py, &report)
}

/// Solves, then simulates all mechanisms on a common seed.
#[pyfunction]
fn compare<'py>(py: Python<'py>, config: &PyConfig) -> PyResult<Bound<'py, PyDict>> {
    let config = config.inner.clone();
    let (_, comparison) = py
        .detach(move || simulator::solve_and_compare(&config))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    let reports = comparison
        .reports
        .iter()
        .map(|r| report_dict(py, r))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("reports", reports)?;
    d.set_item("lp_bound", comparison.lp_bound)?;
    Ok(d)
}

/// MAX_EFF bound: `(value, psi)` with `psi[u] = (win mass, lose mass)`.
#[pyfunction]
fn max_eff(config: &PyConfig) -> PyResult<(f64, Vec<(f64, f64)>)> {
    let process = config.inner.process().map_err(to_py)?;
    let sol = max_eff_bound(&process).map_err(to_py)?;
    let psi = (0..process.n_levels())
        .map(|u| (sol.x[psi_index(u, Outcome::Win)], sol.x[psi_index(u, Outcome::Lose)]))
        .collect();
    Ok((sol.value, psi))
}

/// Long-run reward of RANDOM from the urgency chain alone.
#[pyfunction]
fn random_reward(config: &PyConfig) -> PyResult<f64> {
    let process = config.inner.process().map_err(to_py)?;
    random_long_run_reward(&process).map_err(to_py)
}

#[pymodule]
fn karma_economy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEquilibrium>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(max_eff, m)?)?;
    m.add_function(wrap_pyfunction!(random_reward, m)?)?;
    Ok(())
}
