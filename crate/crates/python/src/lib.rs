//! Python bindings: `import squish`.

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use squish_core::driver::{
    self, ConvergenceRef, IterationRecord, MSchedule, Mode, OneShotConfig, Scheme, SquishConfig,
};
use squish_core::error::SquishError;
use squish_core::hamiltonian::{Grouping, InitialSet};

create_exception!(squish, SquishException, PyException);
create_exception!(squish, TimeoutError, SquishException);

fn to_py(err: SquishError) -> PyErr {
    match err {
        SquishError::Timeout(t) => TimeoutError::new_err(format!(
            "iteration limit reached after {} iterations",
            t.records.len()
        )),
        SquishError::Domain(m) => PyValueError::new_err(m),
        other => SquishException::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

/// One- and two-electron integrals read from an FCIDUMP file.
#[pyclass(name = "IntegralTable", module = "squish", frozen)]
struct PyIntegralTable {
    inner: squish_core::IntegralTable,
}

#[pymethods]
impl PyIntegralTable {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyIntegralTable {
            inner: squish_core::read_fcidump(path).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyIntegralTable {
            inner: squish_core::fcidump::parse_fcidump_str(text).map_err(to_py)?,
        })
    }

    #[getter]
    fn norb(&self) -> usize {
        self.inner.norb()
    }

    #[getter]
    fn nelec(&self) -> usize {
        self.inner.header.nelec
    }

    #[getter]
    fn ms2(&self) -> i32 {
        self.inner.header.ms2
    }

    #[getter]
    fn core_energy(&self) -> f64 {
        self.inner.core_energy
    }

    fn h1(&self, p: usize, q: usize) -> PyResult<f64> {
        self.check(&[p, q])?;
        Ok(self.inner.h1(p, q))
    }

    /// Physicist-order two-body coefficient `h[p,q,r,s] = (pr|qs)`.
    fn h2(&self, p: usize, q: usize, r: usize, s: usize) -> PyResult<f64> {
        self.check(&[p, q, r, s])?;
        Ok(self.inner.h2(p, q, r, s))
    }

    fn hf_energy(&self) -> PyResult<f64> {
        let part = squish_core::classify_orbitals(&self.inner.header).map_err(to_py)?;
        squish_core::hf_energy(&self.inner, &part).map_err(to_py)
    }

    /// Lowest `nroots` total energies of the full Hamiltonian.
    #[pyo3(signature = (nroots = 1, tol = 1e-9))]
    fn fci_energies(&self, py: Python<'_>, nroots: usize, tol: f64) -> PyResult<Vec<f64>> {
        let ex = py
            .detach(|| driver::exact_reference(&self.inner, nroots, tol))
            .map_err(to_py)?;
        Ok(ex.total_energies(self.inner.core_energy))
    }

    fn one_norm(&self) -> f64 {
        squish_core::one_norm(&self.inner)
    }

    fn to_fcidump(&self) -> PyResult<String> {
        squish_core::fcidump::write_fcidump_string(&self.inner).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "IntegralTable(norb={}, nelec={}, ms2={})",
            self.inner.norb(),
            self.inner.header.nelec,
            self.inner.header.ms2
        )
    }
}

impl PyIntegralTable {
    fn check(&self, idx: &[usize]) -> PyResult<()> {
        let m = self.inner.norb();
        if idx.iter().any(|&i| i >= m) {
            return Err(PyValueError::new_err(format!("orbital index out of range 0..{m}")));
        }
        Ok(())
    }
}

fn record_dict<'py>(py: Python<'py>, r: &IterationRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("k", r.k)?;
    d.set_item("included_tuples", r.included_tuples)?;
    d.set_item("vvvv_tuples", r.vvvv_tuples)?;
    d.set_item("e_nv", r.e_nv)?;
    d.set_item("e_v", r.e_v)?;
    d.set_item("e_corr", r.e_corr)?;
    d.set_item("err_exact", r.err_exact)?;
    d.set_item("err_self", r.err_self)?;
    d.set_item("overlap", r.overlap)?;
    d.set_item("one_norm", r.one_norm)?;
    d.set_item("s_squared", r.s_squared)?;
    d.set_item("states_nv", r.states_nv.clone())?;
    d.set_item("states_v", r.states_v.clone())?;
    d.set_item("added_classes", r.added_classes)?;
    Ok(d)
}

/// Result of a truncation run.
#[pyclass(name = "SquishTrace", module = "squish", frozen)]
struct PySquishTrace {
    inner: driver::SquishTrace,
}

#[pymethods]
impl PySquishTrace {
    #[getter]
    fn termination(&self) -> String {
        self.inner.termination.to_string()
    }

    #[getter]
    fn hf_energy(&self) -> f64 {
        self.inner.hf_energy
    }

    #[getter]
    fn exact_energies(&self) -> Option<Vec<f64>> {
        self.inner.exact_energies.clone()
    }

    #[getter]
    fn final_vvvv_tuples(&self) -> usize {
        self.inner.final_vvvv_tuples()
    }

    #[getter]
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.records.iter().map(|r| record_dict(py, r)).collect()
    }

    /// The per-iteration CSV as a string.
    #[pyo3(signature = (timing = false))]
    fn to_csv(&self, timing: bool) -> PyResult<String> {
        let mut buf = Vec::new();
        driver::write_trace_csv(&self.inner, &mut buf, timing).map_err(to_py)?;
        Ok(String::from_utf8(buf).expect("CSV is ASCII"))
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SquishTrace(iterations={}, termination={}, final_vvvv_tuples={})",
            self.inner.records.len(),
            self.inner.termination,
            self.inner.final_vvvv_tuples()
        )
    }
}

#[allow(clippy::too_many_arguments)]
#[pyfunction]
#[pyo3(signature = (
    table, mode = "squish_v", *, initial_set = "no_vvvv", grouping = "conjugate",
    m0 = 2, growth = 10.0, grow_every = 3, delta = 1e-6, convergence = "self",
    states = 1, max_iterations = 200, solver_tol = 1e-9
))]
fn run_squish(
    py: Python<'_>,
    table: &PyIntegralTable,
    mode: &str,
    initial_set: &str,
    grouping: &str,
    m0: usize,
    growth: f64,
    grow_every: usize,
    delta: f64,
    convergence: &str,
    states: usize,
    max_iterations: usize,
    solver_tol: f64,
) -> PyResult<PySquishTrace> {
    let config = SquishConfig {
        mode: parse::<Mode>(mode)?,
        initial_set: parse::<InitialSet>(initial_set)?,
        grouping: parse::<Grouping>(grouping)?,
        schedule: MSchedule {
            m0,
            growth,
            grow_every,
        },
        delta,
        convergence: parse::<ConvergenceRef>(convergence)?,
        states,
        max_iterations,
        solver_tol,
        track_overlap: true,
    };
    let trace = py
        .detach(|| driver::run_squish(&table.inner, &config))
        .map_err(to_py)?;
    Ok(PySquishTrace { inner: trace })
}

/// Rank once with the default approximate state and evaluate each budget;
/// returns a list of `(m, vvvv_tuples, e_eval, err_exact)` tuples.
#[pyfunction]
#[pyo3(signature = (table, budgets, scheme = "energetic"))]
fn run_one_shot(
    py: Python<'_>,
    table: &PyIntegralTable,
    budgets: Vec<usize>,
    scheme: &str,
) -> PyResult<Vec<(usize, usize, f64, f64)>> {
    let config = OneShotConfig {
        scheme: parse::<Scheme>(scheme)?,
        budgets,
        ..Default::default()
    };
    let result = py
        .detach(|| {
            let approx =
                driver::degraded_state(&table.inner, config.initial_set, config.grouping, config.solver_tol)?;
            driver::run_one_shot(&table.inner, &approx, &config)
        })
        .map_err(to_py)?;
    Ok(result
        .points
        .iter()
        .map(|p| (p.m, p.vvvv_tuples, p.e_eval, p.err_exact))
        .collect())
}

/// ASCI energies per iteration as `(k, space_size, E0)` tuples.
#[pyfunction]
#[pyo3(signature = (table, target_sizes = vec![10, 50, 225], delta = 1e-10))]
fn run_asci(
    py: Python<'_>,
    table: &PyIntegralTable,
    target_sizes: Vec<usize>,
    delta: f64,
) -> PyResult<Vec<(usize, usize, f64)>> {
    let config = squish_core::AsciConfig {
        target_sizes,
        delta_e: delta,
        ..Default::default()
    };
    let trace = py
        .detach(|| squish_core::run_asci(&table.inner, &config))
        .map_err(to_py)?;
    Ok(trace.records.iter().map(|r| (r.k, r.space_size, r.e0)).collect())
}

/// `(one_body, two_body, two_body_without_vvvv, vvvv)` term counts for
/// `norb` spatial orbitals of which `n_virtual` are virtual.
#[pyfunction]
fn count_terms(norb: usize, n_virtual: usize) -> PyResult<(usize, usize, usize, usize)> {
    let part = squish_core::OrbitalPartition::synthetic(norb, n_virtual).map_err(to_py)?;
    let terms = squish_core::initial_term_set(&part, InitialSet::NoVvvv, Grouping::Conjugate);
    let r = squish_core::count_report(&part, &terms);
    Ok((r.one_body_total, r.two_body_total, r.included_two_body, r.excluded))
}

#[pyfunction]
fn measurement_budget(eta: usize, n: usize, epsilon: f64) -> PyResult<f64> {
    squish_core::measurement_budget(&squish_core::BudgetQuery {
        eta,
        n_spin_orbitals: n,
        epsilon,
    })
    .map_err(to_py)
}

#[pymodule]
fn squish(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("CHEMICAL_ACCURACY", squish_core::CHEMICAL_ACCURACY)?;
    m.add("SquishException", m.py().get_type::<SquishException>())?;
    m.add("TimeoutError", m.py().get_type::<TimeoutError>())?;
    m.add_class::<PyIntegralTable>()?;
    m.add_class::<PySquishTrace>()?;
    m.add_function(wrap_pyfunction!(run_squish, m)?)?;
    m.add_function(wrap_pyfunction!(run_one_shot, m)?)?;
    m.add_function(wrap_pyfunction!(run_asci, m)?)?;
    m.add_function(wrap_pyfunction!(count_terms, m)?)?;
    m.add_function(wrap_pyfunction!(measurement_budget, m)?)?;
    Ok(())
}
