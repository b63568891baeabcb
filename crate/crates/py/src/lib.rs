//! Python bindings: scenario loading, simulation, design checks and the
//! dense linear-algebra helpers.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use etreg_core::analysis::{compute_metrics, Metrics};
use etreg_core::exogen::{self as core_exogen, SteadyStateGenerator};
use etreg_core::hybridsim as core_sim;
use etreg_core::matlib::{self, Matrix};
use etreg_core::regulation::FirstStage;
use etreg_core::scenario as core_scenario;

pyo3::create_exception!(etreg, EtregError, PyValueError);

fn err(e: etreg_core::Error) -> PyErr {
    EtregError::new_err(e.to_string())
}

type Rows = Vec<Vec<f64>>;

fn to_matrix(rows: Rows) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

#[pyclass(module = "etreg", from_py_object)]
#[derive(Clone)]
struct Scenario {
    inner: core_scenario::Scenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        core_scenario::Scenario::from_toml_str(text).map(|inner| Self { inner }).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        core_scenario::Scenario::load(path).map(|inner| Self { inner }).map_err(err)
    }

    /// One of the bundled scenarios, `lorenz_d01` or `lorenz_d001`.
    #[staticmethod]
    fn bundled(name: &str) -> PyResult<Self> {
        let text = core_scenario::bundled(name)
            .ok_or_else(|| EtregError::new_err(format!("no bundled scenario '{name}'")))?;
        Self::from_toml(text)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.trigger.delta
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.trigger.sigma
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.inner.sim.t_end
    }

    fn with_delta(&self, delta: f64) -> Self {
        Self {
            inner: self.inner.with_delta(delta),
        }
    }

    fn with_step(&self, h: f64) -> Self {
        Self {
            inner: self.inner.with_step(h),
        }
    }

    /// Switch the first virtual control between `"structural"` and
    /// `"paper_literal"`.
    fn with_first_stage(&self, stage: &str) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.law.first_stage = match stage {
            "structural" => FirstStage::Structural,
            "paper_literal" => FirstStage::PaperLiteral,
            other => return Err(EtregError::new_err(format!("unknown first stage '{other}'"))),
        };
        Ok(Self { inner })
    }

    /// Ψ of the synthesized internal model.
    fn psi(&self) -> PyResult<Vec<f64>> {
        Ok(self.inner.build().map_err(err)?.im.psi().to_vec())
    }

    /// Design checks as `(name, passed, detail)` tuples.
    fn verify(&self) -> Vec<(String, bool, String)> {
        self.inner
            .verify()
            .checks
            .into_iter()
            .map(|c| (c.name, c.passed, c.detail))
            .collect()
    }

    /// Runs the closed loop. Releases the GIL while integrating.
    fn simulate(&self, py: Python<'_>) -> PyResult<SimResult> {
        let comps = self.inner.build().map_err(err)?;
        let tail_window = comps.tail_window;
        let res = py.detach(|| comps.simulate()).map_err(err)?;
        Ok(SimResult { res, tail_window })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, delta={}, sigma={})",
            self.inner.name.as_deref().unwrap_or(""),
            self.inner.trigger.delta,
            self.inner.trigger.sigma
        )
    }
}

#[pyclass(module = "etreg")]
struct SimResult {
    res: core_sim::SimResult,
    tail_window: (f64, f64),
}

fn metrics_dict<'py>(py: Python<'py>, m: &Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("status", &m.status)?;
    d.set_item("tail_window", m.tail_window)?;
    d.set_item("tail_sup_error", m.tail_sup_error)?;
    d.set_item("trigger_count_total", m.trigger_count_total)?;
    d.set_item("trigger_counts_windowed", m.trigger_counts_windowed.clone())?;
    d.set_item("min_dwell", m.min_dwell)?;
    d.set_item("mean_dwell", m.mean_dwell)?;
    Ok(d)
}

#[pymethods]
impl SimResult {
    #[getter]
    fn status(&self) -> String {
        self.res.status.to_string()
    }

    #[getter]
    fn trigger_count(&self) -> usize {
        self.res.trigger_count()
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        self.res.trace.iter().map(|r| r.t).collect()
    }

    #[getter]
    fn e(&self) -> Vec<f64> {
        self.res.trace.iter().map(|r| r.e).collect()
    }

    #[getter]
    fn u(&self) -> Vec<f64> {
        self.res.trace.iter().map(|r| r.u).collect()
    }

    #[getter]
    fn trigger_times(&self) -> Vec<f64> {
        self.res.trigger_log.iter().map(|r| r.t_k).collect()
    }

    #[getter]
    fn dwells(&self) -> Vec<f64> {
        self.res.trigger_log.iter().map(|r| r.dwell).collect()
    }

    /// Metrics over `tail_window`, defaulting to the scenario's window.
    #[pyo3(signature = (tail_window=None))]
    fn metrics<'py>(&self, py: Python<'py>, tail_window: Option<(f64, f64)>) -> PyResult<Bound<'py, PyDict>> {
        let m = compute_metrics(&self.res, tail_window.unwrap_or(self.tail_window)).map_err(err)?;
        metrics_dict(py, &m)
    }

    fn __repr__(&self) -> String {
        format!("SimResult(status={}, triggers={})", self.res.status, self.res.trigger_count())
    }
}

/// Solves `X·A − B·X = C`.
#[pyfunction]
fn solve_sylvester(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let x = matlib::solve_sylvester(&to_matrix(a)?, &to_matrix(b)?, &to_matrix(c)?).map_err(err)?;
    Ok(x.to_rows())
}

#[pyfunction]
fn expm(a: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    Ok(matlib::expm(&to_matrix(a)?).map_err(err)?.to_rows())
}

/// `(Ad, Bd)` for `ẋ = Ax + Bu` with `u` held over `dt`.
#[pyfunction]
fn zoh_discretize(a: Rows, b: Rows, dt: f64) -> PyResult<(Rows, Rows)> {
    let (ad, bd) = matlib::zoh_discretize(&to_matrix(a)?, &to_matrix(b)?, dt).map_err(err)?;
    Ok((ad.to_rows(), bd.to_rows()))
}

/// `"Hurwitz"`, `"unstable"` or `"marginal"`.
#[pyfunction]
fn hurwitz_verdict(a: Vec<Vec<f64>>) -> PyResult<String> {
    Ok(matlib::hurwitz_verdict(&to_matrix(a)?).map_err(err)?.to_string())
}

#[pyfunction]
fn char_poly(a: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    matlib::char_poly(&to_matrix(a)?).map_err(err)
}

/// Ψ for the generator `varrho` and the pair `(M, N)`; the default pair is
/// used when both are omitted.
#[pyfunction]
#[pyo3(signature = (varrho, m=None, n=None))]
fn internal_model_psi(varrho: Vec<f64>, m: Option<Vec<Vec<f64>>>, n: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let g = SteadyStateGenerator::new(varrho).map_err(err)?;
    let (m, n) = match (m, n) {
        (Some(m), Some(n)) => (to_matrix(m)?, n),
        (None, None) => core_exogen::default_pair(g.order()),
        _ => return Err(EtregError::new_err("give both m and n, or neither")),
    };
    Ok(core_exogen::synthesize(&g, m, n).map_err(err)?.psi().to_vec())
}

#[pymodule]
fn etreg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EtregError", m.py().get_type::<EtregError>())?;
    m.add_class::<Scenario>()?;
    m.add_class::<SimResult>()?;
    m.add_function(wrap_pyfunction!(solve_sylvester, m)?)?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(zoh_discretize, m)?)?;
    m.add_function(wrap_pyfunction!(hurwitz_verdict, m)?)?;
    m.add_function(wrap_pyfunction!(char_poly, m)?)?;
    m.add_function(wrap_pyfunction!(internal_model_psi, m)?)?;
    Ok(())
}
