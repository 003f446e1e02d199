//! Python bindings: steady states, functionals, evolution and rate analysis.
//! Grid functions cross the boundary as lists of node values on the uniform
//! periodic grid of matching length.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use thinfilm::analysis;
use thinfilm::evolution::{self, EvolutionConfig};
use thinfilm::functionals::{self, EntropyParams};
use thinfilm::grid::{PeriodicGrid, PeriodicGridFunction};
use thinfilm::steady_state::{self, Regime};
use thinfilm::Error;

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Parameter(_) | Error::Domain(_) | Error::Regime(_) | Error::Parse(_) => {
            PyValueError::new_err(msg)
        }
        Error::Numerical(_) | Error::Analysis(_) | Error::Json(_) => PyRuntimeError::new_err(msg),
        Error::Io(_) => PyOSError::new_err(msg),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for thinfilm::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn grid_function(values: Vec<f64>) -> PyResult<PeriodicGridFunction> {
    let g = PeriodicGrid::new(values.len()).py_err()?;
    PeriodicGridFunction::new(g, values).py_err()
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Positive => "Positive",
        Regime::Critical => "Critical",
        Regime::CompactSupport => "CompactSupport",
    }
}

#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: steady_state::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (alpha, mass, n = 3.0, omega = 0.0))]
    fn new(alpha: f64, mass: f64, n: f64, omega: f64) -> PyResult<Self> {
        Ok(Self {
            inner: steady_state::ModelParams::new(alpha, n, omega, mass).py_err()?,
        })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }
    #[getter]
    fn n(&self) -> f64 {
        self.inner.n
    }
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    fn __repr__(&self) -> String {
        let p = self.inner;
        format!(
            "ModelParams(alpha={}, mass={}, n={}, omega={})",
            p.alpha, p.mass, p.n, p.omega
        )
    }
}

#[pyclass(name = "SteadyState", frozen)]
struct PySteadyState {
    inner: steady_state::SteadyState,
}

#[pymethods]
impl PySteadyState {
    #[getter]
    fn regime(&self) -> &'static str {
        regime_name(self.inner.regime)
    }
    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }
    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }
    #[getter]
    fn coeff_a(&self) -> f64 {
        self.inner.coeff_a
    }
    #[getter]
    fn lagrange(&self) -> f64 {
        self.inner.lagrange
    }

    fn value(&self, theta: f64) -> f64 {
        self.inner.value(theta)
    }
    fn derivative(&self, theta: f64) -> f64 {
        self.inner.derivative(theta)
    }
    fn second_derivative(&self, theta: f64) -> f64 {
        self.inner.second_derivative(theta)
    }
    fn contact_slope(&self) -> f64 {
        self.inner.contact_slope()
    }
    fn min_value(&self) -> f64 {
        self.inner.min_value()
    }
    fn dry_length(&self) -> f64 {
        self.inner.dry_length()
    }

    /// Node values on the periodic grid with `n_points` points.
    fn evaluate(&self, n_points: usize) -> PyResult<Vec<f64>> {
        let g = PeriodicGrid::new(n_points).py_err()?;
        Ok(self.inner.evaluate_on_grid(&g).into_values())
    }

    fn euler_lagrange_residual(&self, n_points: usize) -> PyResult<f64> {
        let g = PeriodicGrid::new(n_points).py_err()?;
        Ok(steady_state::euler_lagrange_residual(&self.inner, &g))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "SteadyState(regime={}, alpha={}, mass={}, tau={})",
            self.regime(),
            self.inner.alpha,
            self.inner.mass,
            self.inner.tau
        )
    }
}

#[pyfunction]
#[pyo3(signature = (alpha, mass, n = 3.0))]
fn minimizer(alpha: f64, mass: f64, n: f64) -> PyResult<PySteadyState> {
    let p = steady_state::ModelParams::new(alpha, n, 0.0, mass).py_err()?;
    Ok(PySteadyState {
        inner: steady_state::minimizer(&p).py_err()?,
    })
}

#[pyfunction]
fn classify(mass: f64, alpha: f64) -> &'static str {
    regime_name(steady_state::classify(mass, alpha))
}

#[pyfunction]
fn critical_mass(alpha: f64) -> f64 {
    steady_state::critical_mass(alpha)
}

#[pyfunction]
fn mass_of_tau(tau: f64, alpha: f64) -> PyResult<f64> {
    steady_state::mass_of_tau(tau, alpha).py_err()
}

#[pyfunction]
fn tau_of_mass(mass: f64, alpha: f64) -> PyResult<f64> {
    steady_state::tau_of_mass(mass, alpha).py_err()
}

#[pyfunction]
fn particular_solution(theta: f64, alpha: f64) -> PyResult<f64> {
    steady_state::particular_solution(theta, alpha).py_err()
}

#[pyfunction]
fn mass_tau_curve(alpha: f64, samples: usize) -> PyResult<Vec<(f64, f64)>> {
    analysis::mass_tau_curve(alpha, samples).py_err()
}

/// `(gradient_term, quadratic_term, forcing_term, total)`.
#[pyfunction]
fn energy(values: Vec<f64>, alpha: f64) -> PyResult<(f64, f64, f64, f64)> {
    let e = functionals::energy(&grid_function(values)?, alpha);
    Ok((e.gradient_term, e.quadratic_term, e.forcing_term, e.total))
}

#[pyfunction]
fn energy_lower_bound(mass: f64, alpha: f64) -> f64 {
    functionals::energy_lower_bound(mass, alpha)
}

#[pyfunction]
fn entropy(values: Vec<f64>, n: f64) -> PyResult<f64> {
    let p = EntropyParams::new(n).py_err()?;
    Ok(functionals::entropy(&grid_function(values)?, &p))
}

#[pyfunction]
fn entropy_growth_constant(mass: f64, alpha: f64, n: f64, e0: f64) -> PyResult<f64> {
    let p = EntropyParams::new(n).py_err()?;
    functionals::entropy_growth_constant(mass, alpha, &p, e0).py_err()
}

#[pyfunction]
fn exponential_rate(state: &PySteadyState, n: f64) -> PyResult<(f64, f64)> {
    analysis::exponential_rate(&state.inner, n).py_err()
}

#[pyfunction]
fn power_law_lower_bound(
    length_l: f64,
    s0: f64,
    k0: f64,
    beta: f64,
    times: Vec<f64>,
) -> PyResult<Vec<f64>> {
    analysis::power_law_lower_bound(length_l, s0, k0, beta, &times).py_err()
}

#[pyfunction]
fn touchdown_lower_bound(
    s0: f64,
    k0: f64,
    beta: f64,
    quad_coeff: f64,
    times: Vec<f64>,
) -> PyResult<Vec<f64>> {
    analysis::touchdown_lower_bound(s0, k0, beta, quad_coeff, &times).py_err()
}

#[pyfunction]
fn multiplier_inequality_holds(p: i64, num: i64, den: i64) -> bool {
    analysis::multiplier_inequality_holds(p, num, den)
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory {
    inner: evolution::Trajectory,
    params: steady_state::ModelParams,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }
    #[getter]
    fn energies(&self) -> Vec<f64> {
        self.inner.energies.clone()
    }
    #[getter]
    fn entropies(&self) -> Vec<f64> {
        self.inner.entropies.clone()
    }
    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses.clone()
    }
    #[getter]
    fn snapshot_times(&self) -> Vec<f64> {
        self.inner.snapshot_times.clone()
    }
    #[getter]
    fn snapshots(&self) -> Vec<Vec<f64>> {
        self.inner
            .snapshots
            .iter()
            .map(|s| s.values().to_vec())
            .collect()
    }
    #[getter]
    fn rejected_steps(&self) -> usize {
        self.inner.rejected_steps
    }
    #[getter]
    fn failed(&self) -> bool {
        self.inner.failed
    }
    #[getter]
    fn failure(&self) -> Option<String> {
        self.inner.failure.clone()
    }
    fn final_time(&self) -> f64 {
        self.inner.final_time()
    }

    /// Distances from the minimizer of the trajectory's mass, with the
    /// applicable bound, as a JSON string.
    fn rate_report(&self) -> PyResult<String> {
        let state = steady_state::minimizer(&self.params).py_err()?;
        let r = analysis::rate_report(&self.inner, &state, &self.params).py_err()?;
        serde_json::to_string(&r).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (values, params, t_final, snapshot_times = None, eps = 1e-8, dt = None, dt_max = None))]
fn evolve(
    py: Python<'_>,
    values: Vec<f64>,
    params: PyModelParams,
    t_final: f64,
    snapshot_times: Option<Vec<f64>>,
    eps: f64,
    dt: Option<f64>,
    dt_max: Option<f64>,
) -> PyResult<PyTrajectory> {
    let u0 = grid_function(values)?;
    let mut cfg = EvolutionConfig::new(params.inner, t_final);
    cfg.eps = eps;
    if let Some(times) = snapshot_times {
        cfg.snapshot_times = times;
    }
    if let Some(m) = dt_max {
        cfg.dt_max = m;
        cfg.dt_initial = cfg.dt_initial.min(m);
    }
    if let Some(d) = dt {
        cfg = cfg.with_fixed_dt(d);
    }
    let inner = py.detach(|| evolution::evolve(&u0, &cfg)).py_err()?;
    Ok(PyTrajectory {
        inner,
        params: params.inner,
    })
}

#[pymodule]
fn thinfilm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PySteadyState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(minimizer, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(critical_mass, m)?)?;
    m.add_function(wrap_pyfunction!(mass_of_tau, m)?)?;
    m.add_function(wrap_pyfunction!(tau_of_mass, m)?)?;
    m.add_function(wrap_pyfunction!(particular_solution, m)?)?;
    m.add_function(wrap_pyfunction!(mass_tau_curve, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(energy_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_growth_constant, m)?)?;
    m.add_function(wrap_pyfunction!(exponential_rate, m)?)?;
    m.add_function(wrap_pyfunction!(power_law_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(touchdown_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(multiplier_inequality_holds, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regime_names() {
        assert_eq!(regime_name(Regime::Positive), "Positive");
        assert_eq!(regime_name(Regime::CompactSupport), "CompactSupport");
    }

    #[test]
    fn grid_function_checks_length() {
        assert!(grid_function(vec![1.0; 64]).is_ok());
        assert!(grid_function(vec![1.0; 15]).is_err());
    }
}
