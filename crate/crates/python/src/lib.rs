//! Python bindings for the noisestab estimators.
//!
//! Monte Carlo entry points take `samples` and `seed`; results with the same
//! arguments are identical across runs and worker counts.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use noisestab::fourier::{transform, DiscreteFunction, RangeTag};
use noisestab::maxqcut::io::{format_graph, parse_graph};
use noisestab::maxqcut::{
    alpha_q as core_alpha_q, brute_force_opt, round as core_round, sdp_solve as core_sdp_solve, ulc_reduce as core_ulc_reduce,
    AlphaOptions, Edge, MaxQCutInstance, Reduction, SdpOptions, SdpSolution, UlcInstance,
};
use noisestab::partitions::{halfspace_stack, GaussianPartition};
use noisestab::social_choice::{cosmic_coin_prob, unique_best_prob, BooleanRule, Mode};
use noisestab::stability::{pair_partition_stability, simplex_pair_stability};
use noisestab::{gauss, stream, Error, McConfig, Method, StabilityEstimate};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Convergence(_) | Error::Invariant(_) | Error::AntiSymmetry(_) => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for noisestab::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn mc(samples: u64, seed: u64) -> McConfig {
    McConfig::new(samples, seed)
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::ClosedForm => "closed_form",
        Method::Quadrature => "quadrature",
        Method::MonteCarlo => "monte_carlo",
        Method::Exact => "exact",
    }
}

/// A value with its standard error and the method that produced it.
#[pyclass(name = "Estimate", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEstimate {
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    std_error: f64,
    #[pyo3(get)]
    n_samples: u64,
    #[pyo3(get)]
    method: &'static str,
    #[pyo3(get)]
    seed: u64,
}

impl From<StabilityEstimate> for PyEstimate {
    fn from(e: StabilityEstimate) -> Self {
        PyEstimate {
            value: e.value,
            std_error: e.std_error,
            n_samples: e.n_samples,
            method: method_name(e.method),
            seed: e.seed,
        }
    }
}

#[pymethods]
impl PyEstimate {
    fn __repr__(&self) -> String {
        format!(
            "Estimate(value={}, std_error={}, n_samples={}, method='{}')",
            self.value, self.std_error, self.n_samples, self.method
        )
    }

    fn __float__(&self) -> f64 {
        self.value
    }
}

/// Partition of ℝⁿ into q labeled cells.
#[pyclass(name = "Partition", frozen, skip_from_py_object)]
struct PyPartition(GaussianPartition);

#[pymethods]
impl PyPartition {
    /// Standard simplex partition with q cells in ℝⁿ (default n = q - 1).
    #[staticmethod]
    #[pyo3(signature = (q, n=None))]
    fn simplex(q: usize, n: Option<usize>) -> PyResult<Self> {
        GaussianPartition::simplex(q, n.unwrap_or(q.saturating_sub(1))).py().map(PyPartition)
    }

    /// Parallel half-spaces cutting cells of the given Gaussian measures.
    #[staticmethod]
    fn halfspace_stack(measures: Vec<f64>, n: usize) -> PyResult<Self> {
        halfspace_stack(&measures, n).py().map(PyPartition)
    }

    #[getter]
    fn q(&self) -> usize {
        self.0.q()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn classify(&self, x: Vec<f64>) -> PyResult<usize> {
        self.0.classify(&x).py()
    }

    /// Exact cell measures where known, else None.
    fn cell_measures(&self) -> Option<Vec<f64>> {
        self.0.cell_measures()
    }

    fn to_json(&self) -> String {
        self.0.to_json().to_string()
    }
}

/// Weighted graph for MAX-q-CUT.
#[pyclass(name = "Graph", frozen, skip_from_py_object)]
struct PyGraph(MaxQCutInstance);

#[pymethods]
impl PyGraph {
    /// `edges` is a list of `(u, v, weight)` with weights in [0, 1].
    #[new]
    fn new(vertices: usize, edges: Vec<(usize, usize, f64)>, q: usize) -> PyResult<Self> {
        let edges = edges.into_iter().map(|(u, v, w)| Edge { u, v, w }).collect();
        MaxQCutInstance::new(vertices, edges, q).py().map(PyGraph)
    }

    #[staticmethod]
    fn complete(n: usize, q: usize) -> PyResult<Self> {
        MaxQCutInstance::complete(n, q).py().map(PyGraph)
    }

    #[staticmethod]
    fn path(n: usize, q: usize) -> PyResult<Self> {
        MaxQCutInstance::path(n, q).py().map(PyGraph)
    }

    #[staticmethod]
    fn petersen(q: usize) -> PyResult<Self> {
        MaxQCutInstance::petersen(q).py().map(PyGraph)
    }

    /// Erdős–Rényi graph; weights uniform on [0, 1] unless `unit`.
    #[staticmethod]
    #[pyo3(signature = (n, p, q, seed=0, unit=false))]
    fn gnp(n: usize, p: f64, q: usize, seed: u64, unit: bool) -> PyResult<Self> {
        MaxQCutInstance::gnp(n, p, unit, q, &mut stream(seed, 0)).py().map(PyGraph)
    }

    /// Parses the `u v w` edge-list format.
    #[staticmethod]
    fn from_text(text: &str, q: usize) -> PyResult<Self> {
        parse_graph(text, q).py().map(PyGraph)
    }

    fn to_text(&self) -> String {
        format_graph(&self.0)
    }

    #[getter]
    fn vertices(&self) -> usize {
        self.0.vertices
    }

    #[getter]
    fn q(&self) -> usize {
        self.0.q
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.0.edges.iter().map(|e| (e.u, e.v, e.w)).collect()
    }

    fn total_weight(&self) -> f64 {
        self.0.total_weight()
    }

    fn cut_value(&self, labels: Vec<usize>) -> PyResult<f64> {
        if labels.len() != self.0.vertices || labels.iter().any(|&l| l >= self.0.q) {
            return Err(PyValueError::new_err(format!(
                "need {} labels in 0..{}",
                self.0.vertices, self.0.q
            )));
        }
        Ok(self.0.cut_value(&labels))
    }

    /// Exact optimum and an optimal labeling, by enumeration.
    fn brute_force_opt(&self, py: Python<'_>) -> PyResult<(f64, Vec<usize>)> {
        py.detach(|| brute_force_opt(&self.0)).py()
    }

    fn __repr__(&self) -> String {
        format!("Graph(vertices={}, edges={}, q={})", self.0.vertices, self.0.edges.len(), self.0.q)
    }
}

/// Low-rank solution of the vector relaxation.
#[pyclass(name = "SdpSolution", frozen, skip_from_py_object)]
struct PySdpSolution(SdpSolution);

#[pymethods]
impl PySdpSolution {
    #[getter]
    fn objective(&self) -> f64 {
        self.0.objective
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank
    }

    #[getter]
    fn vectors(&self) -> Vec<Vec<f64>> {
        self.0.vectors.clone()
    }

    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.0.kkt_residual
    }

    #[getter]
    fn pair_residual(&self) -> f64 {
        self.0.pair_residual
    }

    fn dot(&self, u: usize, v: usize) -> PyResult<f64> {
        if u >= self.0.vectors.len() || v >= self.0.vectors.len() {
            return Err(PyValueError::new_err("vertex index out of range"));
        }
        Ok(self.0.dot(u, v))
    }

    fn __repr__(&self) -> String {
        format!("SdpSolution(objective={}, rank={})", self.0.objective, self.0.rank)
    }
}

/// Unique label cover instance.
#[pyclass(name = "UlcInstance", frozen, skip_from_py_object)]
struct PyUlc(UlcInstance);

#[pymethods]
impl PyUlc {
    /// Random satisfiable instance with its satisfying labelings `(inst, lv, lw)`.
    #[staticmethod]
    #[pyo3(signature = (m, v, w, d, seed=0))]
    fn random_satisfiable(m: usize, v: usize, w: usize, d: usize, seed: u64) -> PyResult<(Self, Vec<usize>, Vec<usize>)> {
        let (l, lv, lw) = UlcInstance::random_satisfiable(m, v, w, d, &mut stream(seed, 0)).py()?;
        Ok((PyUlc(l), lv, lw))
    }

    /// Fraction of constraints satisfied by the labelings.
    fn value(&self, lv: Vec<usize>, lw: Vec<usize>) -> PyResult<f64> {
        self.0.value(&lv, &lw).py()
    }

    #[getter]
    fn labels(&self) -> usize {
        self.0.m
    }

    fn to_json(&self) -> String {
        self.0.to_json().to_string()
    }
}

/// MAX-q-CUT instance produced from a label cover instance.
#[pyclass(name = "Reduction", frozen, skip_from_py_object)]
struct PyReduction(Reduction);

#[pymethods]
impl PyReduction {
    #[getter]
    fn graph(&self) -> PyGraph {
        PyGraph(self.0.instance.clone())
    }

    /// Long-code labeling of the graph induced by a W-side labeling.
    fn honest_labels(&self, lw: Vec<usize>) -> PyResult<Vec<usize>> {
        self.0.meta.honest_labels(&lw).py()
    }

    fn total_mass(&self) -> f64 {
        self.0.total_mass()
    }

    /// Cut value of an honest labeling on a satisfiable instance.
    fn completeness(&self) -> f64 {
        let q = self.0.meta.q as f64;
        (q - 1.0) / q * (1.0 - self.0.meta.rho)
    }

    /// Whether edge weights were computed as exact fractions.
    #[getter]
    fn exact(&self) -> bool {
        self.0.meta.exact_weights.is_some()
    }
}

#[pyfunction]
fn normal_cdf(x: f64) -> f64 {
    gauss::normal_cdf(x)
}

#[pyfunction]
fn normal_inv_cdf(p: f64) -> PyResult<f64> {
    gauss::normal_inv_cdf(p).py()
}

/// `P[X ≤ a, Y ≤ b]` for standard normals with correlation rho.
#[pyfunction]
fn bivariate_orthant(a: f64, b: f64, rho: f64) -> PyResult<f64> {
    gauss::bivariate_orthant(a, b, rho).py()
}

/// `P[X_i ≤ t_i for all i]` under exchangeable correlation rho.
#[pyfunction]
#[pyo3(signature = (thresholds, rho, samples=1_000_000, seed=0))]
fn exchangeable_orthant(py: Python<'_>, thresholds: Vec<f64>, rho: f64, samples: u64, seed: u64) -> PyResult<PyEstimate> {
    py.detach(|| gauss::exchangeable_orthant_auto(&thresholds, rho, &mc(samples, seed)))
        .py()
        .map(Into::into)
}

/// Probability that rho-correlated Gaussians land in the same cell.
#[pyfunction]
#[pyo3(signature = (partition, rho, samples=1_000_000, seed=0))]
fn pair_stability(py: Python<'_>, partition: &PyPartition, rho: f64, samples: u64, seed: u64) -> PyResult<PyEstimate> {
    py.detach(|| pair_partition_stability(&partition.0, rho, &mc(samples, seed)))
        .py()
        .map(Into::into)
}

/// Pair stability of the standard simplex partition with q cells.
#[pyfunction]
#[pyo3(signature = (q, rho, samples=1_000_000, seed=0))]
fn simplex_stability(py: Python<'_>, q: usize, rho: f64, samples: u64, seed: u64) -> PyResult<PyEstimate> {
    py.detach(|| simplex_pair_stability(q, rho, &mc(samples, seed))).py().map(Into::into)
}

fn table(values: Vec<f64>, q: usize, n: usize) -> PyResult<DiscreteFunction> {
    DiscreteFunction::new(q, n, 1, RangeTag::Real, values).py()
}

/// Noise stability of a real function on [q]^n given as a table indexed
/// with the first coordinate most significant.
#[pyfunction]
fn noise_stability(values: Vec<f64>, q: usize, n: usize, rho: f64) -> PyResult<f64> {
    transform(&table(values, q, n)?).py()?.noise_stability(rho).py()
}

/// Influence of each coordinate; with `d`, the degree-≤d influences.
#[pyfunction]
#[pyo3(signature = (values, q, n, d=None))]
fn influences(values: Vec<f64>, q: usize, n: usize, d: Option<usize>) -> PyResult<Vec<f64>> {
    let poly = transform(&table(values, q, n)?).py()?;
    (0..n)
        .map(|i| match d {
            Some(d) => poly.low_degree_influence(i, d).py(),
            None => poly.influence(i).py(),
        })
        .collect()
}

fn rule(name: &str, n: usize) -> PyResult<BooleanRule> {
    match name {
        "majority" => Ok(BooleanRule::majority(n)),
        "dictator" => Ok(BooleanRule::Dictator { n, voter: 0 }),
        _ => Err(PyValueError::new_err(format!("unknown rule '{name}'; use 'majority' or 'dictator'"))),
    }
}

fn mode(exact: bool) -> Mode {
    if exact {
        Mode::Exact
    } else {
        Mode::MonteCarlo
    }
}

/// Probability of a unique Condorcet winner among k candidates with n voters.
#[pyfunction]
#[pyo3(signature = (k, n, rule_name="majority", exact=false, samples=1_000_000, seed=0))]
fn condorcet(py: Python<'_>, k: usize, n: usize, rule_name: &str, exact: bool, samples: u64, seed: u64) -> PyResult<PyEstimate> {
    let f = rule(rule_name, n)?;
    py.detach(|| unique_best_prob(&f, k, mode(exact), &mc(samples, seed))).py().map(Into::into)
}

/// Probability that k players with rho-correlated views of n coins agree.
#[pyfunction]
#[pyo3(signature = (k, n, rho, rule_name="majority", exact=false, samples=1_000_000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn cosmic_coin(
    py: Python<'_>,
    k: usize,
    n: usize,
    rho: f64,
    rule_name: &str,
    exact: bool,
    samples: u64,
    seed: u64,
) -> PyResult<PyEstimate> {
    let f = rule(rule_name, n)?;
    py.detach(|| cosmic_coin_prob(&f, k, rho, mode(exact), &mc(samples, seed))).py().map(Into::into)
}

/// The MAX-q-CUT constant; returns `(alpha, rho_star, std_error)`.
#[pyfunction]
#[pyo3(signature = (q, samples=1_000_000, seed=0))]
fn alpha_q(py: Python<'_>, q: usize, samples: u64, seed: u64) -> PyResult<(f64, f64, f64)> {
    let r = py.detach(|| core_alpha_q(q, &AlphaOptions::new(samples, seed))).py()?;
    Ok((r.alpha, r.rho_star, r.std_error))
}

#[pyfunction]
#[pyo3(signature = (graph, restarts=8, seed=0))]
fn sdp_solve(py: Python<'_>, graph: &PyGraph, restarts: usize, seed: u64) -> PyResult<PySdpSolution> {
    let opts = SdpOptions {
        restarts,
        seed,
        ..SdpOptions::default()
    };
    py.detach(|| core_sdp_solve(&graph.0, &opts)).py().map(PySdpSolution)
}

/// Rounds a relaxation with a q-cell partition (default: simplex in ℝ^{q-1}).
/// Returns `(best_labels, best_value, mean_value, std_error)`.
#[pyfunction]
#[pyo3(signature = (solution, graph, repeats=1000, seed=0, partition=None))]
fn round(
    py: Python<'_>,
    solution: &PySdpSolution,
    graph: &PyGraph,
    repeats: u64,
    seed: u64,
    partition: Option<&PyPartition>,
) -> PyResult<(Vec<usize>, f64, f64, f64)> {
    let owned;
    let part = match partition {
        Some(p) => &p.0,
        None => {
            owned = GaussianPartition::simplex(graph.0.q, graph.0.q.saturating_sub(1)).py()?;
            &owned
        }
    };
    let r = py.detach(|| core_round(&solution.0, &graph.0, part, repeats, seed)).py()?;
    Ok((r.best_labels, r.best_value, r.mean_value, r.std_error))
}

#[pyfunction]
fn ulc_reduce(ulc: &PyUlc, q: usize, rho: f64) -> PyResult<PyReduction> {
    core_ulc_reduce(&ulc.0, q, rho).py().map(PyReduction)
}

#[pymodule]
fn pynoisestab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEstimate>()?;
    m.add_class::<PyPartition>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PySdpSolution>()?;
    m.add_class::<PyUlc>()?;
    m.add_class::<PyReduction>()?;
    m.add_function(wrap_pyfunction!(normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(normal_inv_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(bivariate_orthant, m)?)?;
    m.add_function(wrap_pyfunction!(exchangeable_orthant, m)?)?;
    m.add_function(wrap_pyfunction!(pair_stability, m)?)?;
    m.add_function(wrap_pyfunction!(simplex_stability, m)?)?;
    m.add_function(wrap_pyfunction!(noise_stability, m)?)?;
    m.add_function(wrap_pyfunction!(influences, m)?)?;
    m.add_function(wrap_pyfunction!(condorcet, m)?)?;
    m.add_function(wrap_pyfunction!(cosmic_coin, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_q, m)?)?;
    m.add_function(wrap_pyfunction!(sdp_solve, m)?)?;
    m.add_function(wrap_pyfunction!(round, m)?)?;
    m.add_function(wrap_pyfunction!(ulc_reduce, m)?)?;
    Ok(())
}
