//! Python bindings. Systems and partitions are immutable wrapper classes;
//! everything else is a module-level function taking them.

use entropy_lab::dynent::{self, Caps, EntropyKind, SharpSearch};
use entropy_lab::dynsys::{self, default_labels, StochasticSystem};
use entropy_lab::entcore::{self, DensityMatrix, ProbVector, StochasticMatrix};
use entropy_lab::pou::{self, PartitionOfUnity};
use entropy_lab::Error;
use nalgebra::DMatrix;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(entropy_lab, CapExceeded, PyValueError, "A size cap was exceeded.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::CapExceeded { .. } => CapExceeded::new_err(e.to_string()),
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn kind_of(kind: &str) -> PyResult<EntropyKind> {
    kind.parse().map_err(|e: Error| py_err(e))
}

fn caps(word_cap: Option<usize>, afl_dim_cap: Option<usize>) -> Caps {
    let mut caps = Caps::default();
    if let Some(w) = word_cap {
        caps.word_cap = w;
    }
    if let Some(d) = afl_dim_cap {
        caps.afl_dim_cap = d;
    }
    caps
}

#[pyclass(name = "System", frozen, module = "entropy_lab")]
struct PySystem(StochasticSystem);

#[pymethods]
impl PySystem {
    /// Markov chain from transition rows; the stationary measure is computed
    /// when not given.
    #[staticmethod]
    #[pyo3(signature = (transition, stationary=None, states=None))]
    fn markov(transition: Vec<Vec<f64>>, stationary: Option<Vec<f64>>, states: Option<Vec<String>>) -> PyResult<Self> {
        let p = StochasticMatrix::from_rows(&transition).map_err(py_err)?;
        let states = states.unwrap_or_else(|| default_labels(p.nrows()));
        let mu = stationary.map(ProbVector::new).transpose().map_err(py_err)?;
        dynsys::make_markov(states, p, mu).map(PySystem).map_err(py_err)
    }

    #[staticmethod]
    fn bernoulli(p: Vec<f64>) -> PyResult<Self> {
        let p = ProbVector::new(p).map_err(py_err)?;
        dynsys::make_bernoulli(&p).map(PySystem).map_err(py_err)
    }

    /// Deterministic dynamics `x -> map[x]` with an explicit invariant measure.
    #[staticmethod]
    #[pyo3(signature = (map, stationary, states=None))]
    fn deterministic(map: Vec<usize>, stationary: Vec<f64>, states: Option<Vec<String>>) -> PyResult<Self> {
        let states = states.unwrap_or_else(|| default_labels(map.len()));
        let mu = ProbVector::new(stationary).map_err(py_err)?;
        dynsys::make_deterministic(states, &map, mu).map(PySystem).map_err(py_err)
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.0.n_states()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.0.states().to_vec()
    }

    #[getter]
    fn stationary(&self) -> Vec<f64> {
        self.0.stationary().as_slice().to_vec()
    }

    #[getter]
    fn transition(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.transition().matrix())
    }

    fn is_deterministic(&self) -> bool {
        self.0.is_deterministic()
    }

    /// `Theta(f)` for an observable given as a list of values.
    fn apply(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0
            .theta_apply(&dynsys::Observable(f))
            .map(|o| o.values().to_vec())
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("System(n_states={}, states={:?})", self.0.n_states(), self.0.states())
    }
}

#[pyclass(name = "Partition", frozen, module = "entropy_lab")]
struct PyPartition(PartitionOfUnity);

#[pymethods]
impl PyPartition {
    /// From response rows: `response[x][k]` is `f_k(x)`.
    #[new]
    #[pyo3(signature = (response, labels=None))]
    fn new(response: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> PyResult<Self> {
        let mut f = PartitionOfUnity::from_rows(&response).map_err(py_err)?;
        if let Some(labels) = labels {
            f = f.with_labels(labels).map_err(py_err)?;
        }
        Ok(PyPartition(f))
    }

    #[staticmethod]
    fn sharp(n_states: usize, cells: Vec<Vec<usize>>) -> PyResult<Self> {
        pou::sharp_partition(n_states, &cells).map(PyPartition).map_err(py_err)
    }

    #[staticmethod]
    fn extremal(n_states: usize) -> Self {
        PyPartition(pou::extremal_partition(n_states))
    }

    #[staticmethod]
    fn uniform(n_states: usize, k: usize) -> PyResult<Self> {
        pou::uniform_unsharp(n_states, k).map(PyPartition).map_err(py_err)
    }

    #[getter]
    fn response(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.response())
    }

    #[getter]
    fn n_states(&self) -> usize {
        self.0.n_states()
    }

    #[getter]
    fn n_outcomes(&self) -> usize {
        self.0.n_outcomes()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.0.labels()
    }

    fn is_sharp(&self) -> bool {
        self.0.is_sharp()
    }

    fn cells(&self) -> Option<Vec<Vec<usize>>> {
        self.0.cells()
    }

    fn join(&self, other: &PyPartition) -> PyResult<Self> {
        pou::join(&self.0, &other.0).map(PyPartition).map_err(py_err)
    }

    fn evolve(&self, system: &PySystem) -> PyResult<Self> {
        pou::evolve(&system.0, &self.0).map(PyPartition).map_err(py_err)
    }

    /// The outcome distribution under `mu`.
    fn distribution(&self, mu: Vec<f64>) -> PyResult<Vec<f64>> {
        let mu = ProbVector::new(mu).map_err(py_err)?;
        pou::distribution(&mu, &self.0).map(ProbVector::into_inner).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Partition(n_states={}, n_outcomes={}, sharp={})",
            self.0.n_states(),
            self.0.n_outcomes(),
            self.0.is_sharp()
        )
    }
}

/// Depth-`depth` refinement; `scheme` is "afl" or "mak".
#[pyfunction]
#[pyo3(signature = (system, partition, depth, scheme="afl", word_cap=None))]
fn refine(system: &PySystem, partition: &PyPartition, depth: usize, scheme: &str, word_cap: Option<usize>) -> PyResult<PyPartition> {
    let cap = caps(word_cap, None).word_cap;
    let refined = match scheme {
        "afl" => pou::refine_afl(&system.0, &partition.0, depth, cap),
        "mak" => pou::refine_mak(&system.0, &partition.0, depth, cap),
        other => return Err(PyValueError::new_err(format!("unknown scheme {other:?}"))),
    };
    refined.map(|r| PyPartition(r.into_partition())).map_err(py_err)
}

#[pyfunction]
fn shannon_entropy(p: Vec<f64>) -> PyResult<f64> {
    ProbVector::new(p).map(|p| entcore::shannon_entropy(&p)).map_err(py_err)
}

#[pyfunction]
fn von_neumann_entropy(rho: Vec<Vec<f64>>) -> PyResult<f64> {
    let n = rho.len();
    if rho.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("density matrix must be square"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rho[i][j]);
    DensityMatrix::new(m).map(|d| entcore::von_neumann_entropy(&d)).map_err(py_err)
}

/// The Hudetz functional of `partition` under `mu`.
#[pyfunction]
fn hud_functional(mu: Vec<f64>, partition: &PyPartition) -> PyResult<f64> {
    let mu = ProbVector::new(mu).map_err(py_err)?;
    dynent::hud_functional(&mu, &partition.0).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (system, partition, depth, afl_dim_cap=None))]
fn rho_afl(system: &PySystem, partition: &PyPartition, depth: usize, afl_dim_cap: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
    let cap = caps(None, afl_dim_cap).afl_dim_cap;
    dynent::rho_afl(&system.0, &partition.0, depth, cap)
        .map(|d| rows_of(d.entries()))
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (mu, partition, afl_dim_cap=None))]
fn rho_mak(mu: Vec<f64>, partition: &PyPartition, afl_dim_cap: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
    let mu = ProbVector::new(mu).map_err(py_err)?;
    let cap = caps(None, afl_dim_cap).afl_dim_cap;
    dynent::rho_mak(&mu, &partition.0, cap)
        .map(|d| rows_of(d.entries()))
        .map_err(py_err)
}

/// The depth-`depth` entropy (not divided by the depth).
#[pyfunction]
#[pyo3(signature = (system, partition, kind, depth, word_cap=None, afl_dim_cap=None))]
fn entropy(
    system: &PySystem,
    partition: &PyPartition,
    kind: &str,
    depth: usize,
    word_cap: Option<usize>,
    afl_dim_cap: Option<usize>,
) -> PyResult<f64> {
    dynent::entropy_at(&system.0, &partition.0, kind_of(kind)?, depth, &caps(word_cap, afl_dim_cap)).map_err(py_err)
}

/// `s_1..s_nmax` with increments and ratios. A cap hit ends the sequence
/// early and sets `truncated_at`.
#[pyfunction]
#[pyo3(signature = (system, partition, kind, nmax, word_cap=None, afl_dim_cap=None))]
fn entropy_sequence<'py>(
    py: Python<'py>,
    system: &PySystem,
    partition: &PyPartition,
    kind: &str,
    nmax: usize,
    word_cap: Option<usize>,
    afl_dim_cap: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let seq = dynent::entropy_sequence(&system.0, &partition.0, kind_of(kind)?, nmax, &caps(word_cap, afl_dim_cap))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("kind", seq.kind.as_str())?;
    out.set_item("values", &seq.values)?;
    out.set_item("increments", seq.increments())?;
    out.set_item("ratios", seq.ratios())?;
    out.set_item("truncated_at", seq.truncation.as_ref().map(|t| t.depth))?;
    Ok(out)
}

/// The last increment of the entropy sequence up to `nmax`.
#[pyfunction]
#[pyo3(signature = (system, partition, kind, nmax=8))]
fn rate(system: &PySystem, partition: &PyPartition, kind: &str, nmax: usize) -> PyResult<f64> {
    let seq = dynent::entropy_sequence(&system.0, &partition.0, kind_of(kind)?, nmax, &Caps::default()).map_err(py_err)?;
    dynent::rate_estimate(&seq).map(|r| r.last_increment).map_err(py_err)
}

/// Heuristic CNT search over trivial, identification and random decompositions.
#[pyfunction]
#[pyo3(signature = (system, partitions, seed, budget=100))]
fn cnt_search<'py>(
    py: Python<'py>,
    system: &PySystem,
    partitions: Vec<PyRef<'py, PyPartition>>,
    seed: u64,
    budget: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let fs: Vec<PartitionOfUnity> = partitions.iter().map(|p| p.0.clone()).collect();
    let found = dynent::cnt_search(&system.0, &fs, budget, seed, &Caps::default()).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("best", found.best)?;
    out.set_item("witness_source", found.witness_source)?;
    out.set_item("identifications_evaluated", found.identifications_evaluated)?;
    out.set_item("identifications_truncated", found.identifications_truncated)?;
    out.set_item("negative_identifications", found.negative_identifications)?;
    out.set_item("most_negative", found.most_negative.map(|(v, _)| v))?;
    out.set_item("random_evaluated", found.random_evaluated)?;
    Ok(out)
}

/// Best sharp partition by last increment; returns `(cells, rate)`.
#[pyfunction]
#[pyo3(signature = (system, kind, nmax=6, exhaustive=true))]
fn sup_over_sharp(system: &PySystem, kind: &str, nmax: usize, exhaustive: bool) -> PyResult<(Vec<Vec<usize>>, f64)> {
    let mode = if exhaustive { SharpSearch::Exhaustive } else { SharpSearch::ExtremalOnly };
    let sup = dynent::sup_over_sharp(&system.0, kind_of(kind)?, nmax, mode, &Caps::default()).map_err(py_err)?;
    Ok((sup.cells, sup.rate.last_increment))
}

#[pymodule(name = "entropy_lab")]
fn entropy_lab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CapExceeded", m.py().get_type::<CapExceeded>())?;
    m.add_class::<PySystem>()?;
    m.add_class::<PyPartition>()?;
    m.add_function(wrap_pyfunction!(refine, m)?)?;
    m.add_function(wrap_pyfunction!(shannon_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(von_neumann_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(hud_functional, m)?)?;
    m.add_function(wrap_pyfunction!(rho_afl, m)?)?;
    m.add_function(wrap_pyfunction!(rho_mak, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(cnt_search, m)?)?;
    m.add_function(wrap_pyfunction!(sup_over_sharp, m)?)?;
    Ok(())
}
