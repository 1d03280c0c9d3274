//! Python bindings: configuration, distance matrices, embeddings, Mantel
//! correlation, the simulators and both sweeps. Matrices cross the boundary
//! as lists of row lists.

use std::collections::BTreeMap;

use fig_core::config::PipelineConfig;
use fig_core::embed::Embedding;
use fig_core::eval::{mantel as mantel_core, noise_sweep as noise_sweep_core, window_sweep as window_sweep_core};
use fig_core::simulate::{simulate_sphere_walk as sphere_core, simulate_staged_surrogate as surrogate_core, STAGE_NAMES};
use fig_core::{DistanceMatrix, Method, TimeSeries};
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

pyo3::create_exception!(figpy, FigError, PyValueError);

fn to_py(e: fig_core::FigError) -> PyErr {
    FigError::new_err(e.to_string())
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix_of(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(FigError::new_err("rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, d, |i, j| rows[i][j]))
}

fn method_of(name: &str) -> PyResult<Method> {
    name.parse().map_err(FigError::new_err)
}

/// Pipeline settings addressed by the same `section.key` names as config files.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: PipelineConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = PipelineConfig::default();
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let key: String = k.extract::<String>()?.replace("__", ".");
                inner.set(&key, &v.str()?.to_string()).map_err(to_py)?;
            }
        }
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: PipelineConfig::parse(text).map_err(to_py)? })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        self.inner.set(key, &value.str()?.to_string()).map_err(to_py)
    }

    fn get(&self, key: &str) -> PyResult<String> {
        self.inner
            .entries()
            .into_iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v)
            .ok_or_else(|| FigError::new_err(format!("unknown key '{key}'")))
    }

    fn entries(&self) -> Vec<(String, String)> {
        self.inner.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn __repr__(&self) -> String {
        format!("Config(hash={})", &self.inner.hash()[..12])
    }
}

#[pyclass(name = "DistanceMatrix", from_py_object)]
#[derive(Clone)]
struct PyDistanceMatrix {
    inner: DistanceMatrix,
}

#[pymethods]
impl PyDistanceMatrix {
    /// Wraps a square matrix; the upper triangle is mirrored.
    #[new]
    #[pyo3(signature = (rows, method = "euclidean"))]
    fn new(rows: Vec<Vec<f64>>, method: &str) -> PyResult<Self> {
        let m = matrix_of(&rows)?;
        Ok(Self { inner: DistanceMatrix::from_matrix(&m, method_of(method)?).map_err(to_py)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method().name()
    }

    #[getter]
    fn metadata(&self) -> BTreeMap<String, String> {
        self.inner.metadata.clone()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        let n = self.inner.n();
        if i >= n || j >= n {
            return Err(FigError::new_err(format!("index ({i}, {j}) out of range for n = {n}")));
        }
        Ok(self.inner.get(i, j))
    }

    fn to_list(&self) -> Vec<Vec<f64>> {
        rows_of(self.inner.matrix())
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("DistanceMatrix(n={}, method={})", self.inner.n(), self.inner.method())
    }
}

#[pyclass(name = "Embedding", from_py_object)]
#[derive(Clone)]
struct PyEmbedding {
    inner: Embedding,
}

#[pymethods]
impl PyEmbedding {
    #[getter]
    fn coords(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.coords)
    }

    #[getter]
    fn stress_history(&self) -> Vec<f64> {
        self.inner.stress_history.clone()
    }

    #[getter]
    fn metadata(&self) -> BTreeMap<String, String> {
        self.inner.metadata.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    /// Euclidean distances between the embedded points.
    fn distances(&self) -> PyDistanceMatrix {
        PyDistanceMatrix { inner: fig_core::eval::embedding_distances(&self.inner) }
    }

    fn __repr__(&self) -> String {
        format!("Embedding(n={}, r={}, stress={:.6e})", self.inner.n(), self.inner.r(), self.inner.final_stress())
    }
}

fn config_or_default(config: Option<&PyConfig>) -> PipelineConfig {
    config.map(|c| c.inner.clone()).unwrap_or_default()
}

/// Distance matrix of the rows of `x`; the method defaults to the config's.
#[pyfunction]
#[pyo3(signature = (x, config = None, method = None))]
fn distance_matrix(
    py: Python<'_>,
    x: Vec<Vec<f64>>,
    config: Option<&PyConfig>,
    method: Option<&str>,
) -> PyResult<PyDistanceMatrix> {
    let cfg = config_or_default(config);
    let method = match method {
        Some(m) => method_of(m)?,
        None => cfg.method,
    };
    let ts = TimeSeries::new(matrix_of(&x)?).map_err(to_py)?;
    let d = py.detach(|| cfg.distance(&ts, method)).map_err(to_py)?;
    Ok(PyDistanceMatrix { inner: d })
}

#[pyfunction]
#[pyo3(signature = (d, config = None))]
fn embed(py: Python<'_>, d: &PyDistanceMatrix, config: Option<&PyConfig>) -> PyResult<PyEmbedding> {
    let cfg = config_or_default(config);
    let e = py.detach(|| fig_core::embed::embed(&d.inner, &cfg.embed)).map_err(to_py)?;
    Ok(PyEmbedding { inner: e })
}

/// `(r, p_value)`; the p-value is `None` without permutations.
#[pyfunction]
#[pyo3(signature = (a, b, n_perm = 0, seed = 0))]
fn mantel(a: &PyDistanceMatrix, b: &PyDistanceMatrix, n_perm: usize, seed: u64) -> PyResult<(f64, Option<f64>)> {
    let res = mantel_core(&a.inner, &b.inner, n_perm, seed).map_err(to_py)?;
    Ok((res.r, res.p_value))
}

/// Dict with `x` (noisy observations), `y` (clean sphere points) and
/// `theta` (azimuth, elevation), each a list of rows.
#[pyfunction]
#[pyo3(signature = (n = 1000, sigma_step = fig_core::simulate::DEFAULT_SIGMA_STEP, sigma_noise = 0.1, seed = 1))]
fn simulate_sphere_walk<'py>(
    py: Python<'py>,
    n: usize,
    sigma_step: f64,
    sigma_noise: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let w = sphere_core(n, sigma_step, sigma_noise, seed).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("x", rows_of(&w.x))?;
    out.set_item("y", rows_of(&w.y))?;
    out.set_item("theta", rows_of(&w.theta))?;
    Ok(out)
}

/// `(rows, stage_names)` of the staged surrogate, one stage name per sample.
#[pyfunction]
#[pyo3(signature = (n_segments = 200, d = 6, segment_len = 32, seed = 1))]
fn simulate_staged_surrogate(
    n_segments: usize,
    d: usize,
    segment_len: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<String>)> {
    let cfg = fig_core::simulate::SurrogateConfig { n_segments, d, segment_len, ..Default::default() };
    let s = surrogate_core(&cfg, seed).map_err(to_py)?;
    let labels = s.stages.iter().map(|&k| STAGE_NAMES[k].to_string()).collect();
    Ok((rows_of(s.series.data()), labels))
}

/// One dict per (method, sigma, seed) with the Mantel correlation to the
/// true angles.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn noise_sweep<'py>(py: Python<'py>, config: Option<&PyConfig>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config_or_default(config);
    let records = py.detach(|| noise_sweep_core(&cfg.sweep_sigmas, &cfg.seeds, &cfg)).map_err(to_py)?;
    records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("method", &r.method)?;
            d.set_item("sigma", r.setting)?;
            d.set_item("seed", r.seed)?;
            d.set_item("mantel_r", r.mantel_r)?;
            Ok(d)
        })
        .collect()
}

/// One dict per method with the mean pairwise Mantel grid across window
/// lengths and its off-diagonal summary.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn window_sweep<'py>(py: Python<'py>, config: Option<&PyConfig>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = config_or_default(config);
    let grids = py
        .detach(|| window_sweep_core(&cfg.sweep_l2_values, &cfg.seeds, &cfg.surrogate(), &cfg))
        .map_err(to_py)?;
    grids
        .iter()
        .map(|g| {
            let d = PyDict::new(py);
            d.set_item("method", g.method.name())?;
            d.set_item("window_values", g.window_values.clone())?;
            d.set_item("grid", rows_of(&g.m))?;
            d.set_item("grid_std", rows_of(&g.std))?;
            d.set_item("mean", g.summary_mean)?;
            d.set_item("std", g.summary_std)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn figpy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FigError", m.py().get_type::<FigError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyDistanceMatrix>()?;
    m.add_class::<PyEmbedding>()?;
    m.add_function(wrap_pyfunction!(distance_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(mantel, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_sphere_walk, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_staged_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(noise_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(window_sweep, m)?)?;
    Ok(())
}
