//! Python bindings for the gridprint library.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gridprint::cluster::ClusterTable;
use gridprint::dedup::{deduplicate, exhaustive_dedup, DEFAULT_ORACLE_CAP};
use gridprint::stats::{
    corpus_stats, estimate_workload, fit_regression, format_hms, predict_avg, RegressionFit,
};
use gridprint::{
    build_table, compute_index, generate, identify, load_corpus, match_score, parse_signature,
    serialize_signature, Corpus, Error, GenSpec, GridParams, MatchParams, Minutia, Signature,
    TripletMatcher,
};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn grid(n: u32) -> PyResult<GridParams> {
    GridParams::new(n).map_err(to_py)
}

fn params_or_default(p: Option<PyRef<'_, PyMatchParams>>) -> MatchParams {
    p.map(|p| p.inner).unwrap_or_default()
}

fn owned(sigs: &[PyRef<'_, PySignature>]) -> Vec<Signature> {
    sigs.iter().map(|s| s.inner.clone()).collect()
}

/// A fingerprint signature: a record id and its minutiae as
/// `(x, y, theta, type)` tuples.
#[pyclass(name = "Signature", module = "pygridprint", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySignature {
    inner: Signature,
}

#[pymethods]
impl PySignature {
    #[new]
    fn new(record_id: String, minutiae: Vec<(u32, u32, f64, i32)>) -> PyResult<Self> {
        let minutiae = minutiae
            .into_iter()
            .map(|(x, y, t, c)| Minutia::new(x, y, t, c))
            .collect();
        Signature::new(record_id, minutiae)
            .map(|inner| PySignature { inner })
            .map_err(to_py)
    }

    /// Parses `x;y;theta;type` lines.
    #[staticmethod]
    fn parse(text: &str, record_id: &str) -> PyResult<Self> {
        parse_signature(text, record_id)
            .map(|inner| PySignature { inner })
            .map_err(to_py)
    }

    fn to_text(&self) -> PyResult<String> {
        serialize_signature(&self.inner).map_err(to_py)
    }

    #[getter]
    fn record_id(&self) -> &str {
        &self.inner.record_id
    }

    #[getter]
    fn minutiae(&self) -> Vec<(u32, u32, f64, i32)> {
        self.inner
            .minutiae
            .iter()
            .map(|m| (m.x, m.y, m.theta, m.type_code))
            .collect()
    }

    #[pyo3(signature = (n = 5))]
    fn index_key(&self, n: u32) -> PyResult<String> {
        compute_index(&self.inner, grid(n)?)
            .map(|k| k.into_string())
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Signature({:?}, {} minutiae)", self.inner.record_id, self.inner.len())
    }

    fn __eq__(&self, other: PyRef<'_, PySignature>) -> bool {
        self.inner == other.inner
    }
}

#[pyclass(name = "MatchParams", module = "pygridprint", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyMatchParams {
    inner: MatchParams,
}

#[pymethods]
impl PyMatchParams {
    #[new]
    #[pyo3(signature = (
        min_edge = 15.0,
        max_edge = 100.0,
        neighbors_k = 4,
        score_threshold = 90.0,
        min_matched_descriptors = 0,
        side_tolerance = 5.0,
        angle_tolerance = 0.2618
    ))]
    fn new(
        min_edge: f64,
        max_edge: f64,
        neighbors_k: usize,
        score_threshold: f64,
        min_matched_descriptors: usize,
        side_tolerance: f64,
        angle_tolerance: f64,
    ) -> PyResult<Self> {
        let inner = MatchParams {
            min_edge,
            max_edge,
            neighbors_k,
            score_threshold,
            min_matched_descriptors,
            side_tolerance,
            angle_tolerance,
        };
        inner.validate().map_err(to_py)?;
        Ok(PyMatchParams { inner })
    }

    #[getter]
    fn min_edge(&self) -> f64 {
        self.inner.min_edge
    }

    #[getter]
    fn max_edge(&self) -> f64 {
        self.inner.max_edge
    }

    #[getter]
    fn neighbors_k(&self) -> usize {
        self.inner.neighbors_k
    }

    #[getter]
    fn score_threshold(&self) -> f64 {
        self.inner.score_threshold
    }

    #[getter]
    fn min_matched_descriptors(&self) -> usize {
        self.inner.min_matched_descriptors
    }

    #[getter]
    fn side_tolerance(&self) -> f64 {
        self.inner.side_tolerance
    }

    #[getter]
    fn angle_tolerance(&self) -> f64 {
        self.inner.angle_tolerance
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Index key to record-id buckets, in insertion order.
#[pyclass(name = "ClusterTable", module = "pygridprint", frozen)]
struct PyClusterTable {
    inner: ClusterTable,
}

#[pymethods]
impl PyClusterTable {
    #[staticmethod]
    #[pyo3(signature = (signatures, n = 5))]
    fn build(signatures: Vec<PyRef<'_, PySignature>>, n: u32) -> PyResult<Self> {
        let sigs = owned(&signatures);
        build_table(&sigs, grid(n)?)
            .map(|inner| PyClusterTable { inner })
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ClusterTable::load_file(&path)
            .map(|inner| PyClusterTable { inner })
            .map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    fn lookup(&self, key: &str) -> Vec<String> {
        self.inner.lookup(key).to_vec()
    }

    fn buckets(&self) -> Vec<(String, Vec<String>)> {
        self.inner
            .buckets()
            .map(|(k, ids)| (k.to_string(), ids.to_vec()))
            .collect()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn bucket_count(&self) -> usize {
        self.inner.bucket_count()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.size()
    }
}

#[pyfunction]
#[pyo3(name = "compute_index", signature = (signature, n = 5))]
fn py_compute_index(signature: PyRef<'_, PySignature>, n: u32) -> PyResult<String> {
    signature.index_key(n)
}

/// Returns `(score, matched_descriptors)`.
#[pyfunction]
#[pyo3(name = "match_score", signature = (a, b, params = None))]
fn py_match_score(
    a: PyRef<'_, PySignature>,
    b: PyRef<'_, PySignature>,
    params: Option<PyRef<'_, PyMatchParams>>,
) -> PyResult<(f64, usize)> {
    let r = match_score(&a.inner, &b.inner, &params_or_default(params)).map_err(to_py)?;
    Ok((r.score, r.matched_descriptors))
}

/// Returns a dict with `key`, `candidates` as `(id, score, is_match)` and `penetration`.
#[pyfunction]
#[pyo3(name = "identify", signature = (query, table, signatures, n = 5, params = None))]
fn py_identify<'py>(
    py: Python<'py>,
    query: PyRef<'py, PySignature>,
    table: PyRef<'py, PyClusterTable>,
    signatures: Vec<PyRef<'py, PySignature>>,
    n: u32,
    params: Option<PyRef<'py, PyMatchParams>>,
) -> PyResult<Bound<'py, PyDict>> {
    let corpus = Corpus::new(owned(&signatures)).map_err(to_py)?;
    let matcher = TripletMatcher::new(params_or_default(params)).map_err(to_py)?;
    let r = identify(&query.inner, &table.inner, &corpus, grid(n)?, &matcher).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("key", r.key.as_str())?;
    let candidates: Vec<(String, f64, bool)> = r
        .candidates
        .into_iter()
        .map(|c| (c.record_id, c.score, c.is_match))
        .collect();
    out.set_item("candidates", candidates)?;
    out.set_item("penetration", r.penetration)?;
    Ok(out)
}

/// Returns a dict with `groups` (key to list of groups) and `comparisons`.
#[pyfunction]
#[pyo3(name = "deduplicate", signature = (signatures, n = 5, params = None))]
fn py_deduplicate<'py>(
    py: Python<'py>,
    signatures: Vec<PyRef<'py, PySignature>>,
    n: u32,
    params: Option<PyRef<'py, PyMatchParams>>,
) -> PyResult<Bound<'py, PyDict>> {
    let sigs = owned(&signatures);
    let grid = grid(n)?;
    let matcher = TripletMatcher::new(params_or_default(params)).map_err(to_py)?;
    let report = py
        .detach(move || -> gridprint::Result<_> {
            let corpus = Corpus::new(sigs)?;
            let table = build_table(corpus.signatures(), grid)?;
            deduplicate(&table, &corpus, &matcher)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    let groups: Vec<(String, Vec<Vec<String>>)> = report.groups_by_key.into_iter().collect();
    out.set_item("groups", groups)?;
    out.set_item("comparisons", report.comparisons)?;
    Ok(out)
}

/// All-pairs reference grouping; connected components of the match graph.
#[pyfunction]
#[pyo3(name = "exhaustive_dedup", signature = (signatures, params = None, cap = DEFAULT_ORACLE_CAP))]
fn py_exhaustive_dedup(
    py: Python<'_>,
    signatures: Vec<PyRef<'_, PySignature>>,
    params: Option<PyRef<'_, PyMatchParams>>,
    cap: usize,
) -> PyResult<Vec<Vec<String>>> {
    let sigs = owned(&signatures);
    let matcher = TripletMatcher::new(params_or_default(params)).map_err(to_py)?;
    py.detach(move || exhaustive_dedup(&sigs, &matcher, cap))
        .map_err(to_py)
}

/// Bucket statistics after deduplication, keyed by column name.
#[pyfunction]
#[pyo3(name = "corpus_stats", signature = (signatures, n = 5, params = None))]
fn py_corpus_stats<'py>(
    py: Python<'py>,
    signatures: Vec<PyRef<'py, PySignature>>,
    n: u32,
    params: Option<PyRef<'py, PyMatchParams>>,
) -> PyResult<Bound<'py, PyDict>> {
    let sigs = owned(&signatures);
    let grid = grid(n)?;
    let matcher = TripletMatcher::new(params_or_default(params)).map_err(to_py)?;
    let stats = py
        .detach(move || -> gridprint::Result<_> {
            let corpus = Corpus::new(sigs)?;
            let start = std::time::Instant::now();
            let table = build_table(corpus.signatures(), grid)?;
            let report = deduplicate(&table, &corpus, &matcher)?;
            corpus_stats(&table, &report, start.elapsed())
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("size", stats.size)?;
    out.set_item("nb_class", stats.nb_class)?;
    out.set_item("avg", stats.avg)?;
    out.set_item("min_p", stats.min_p)?;
    out.set_item("max_p", stats.max_p)?;
    out.set_item("std_dev", stats.std_dev)?;
    out.set_item("min_rate", stats.min_rate)?;
    out.set_item("max_rate", stats.max_rate)?;
    out.set_item("duplicates", stats.duplicates)?;
    out.set_item("duration", stats.duration.as_secs_f64())?;
    Ok(out)
}

/// Least-squares line through `(x, y)` points; returns `(slope, intercept)`.
#[pyfunction]
#[pyo3(name = "fit_regression")]
fn py_fit_regression(points: Vec<(f64, f64)>) -> PyResult<(f64, f64)> {
    let f = fit_regression(&points).map_err(to_py)?;
    Ok((f.slope, f.intercept))
}

#[pyfunction]
#[pyo3(name = "predict_avg")]
fn py_predict_avg(slope: f64, intercept: f64, n: f64) -> f64 {
    predict_avg(&RegressionFit { slope, intercept }, n)
}

#[pyfunction]
#[pyo3(name = "estimate_workload", signature = (n, avg, ms_per_comparison = 1.0))]
fn py_estimate_workload(py: Python<'_>, n: f64, avg: f64, ms_per_comparison: f64) -> PyResult<Bound<'_, PyDict>> {
    let w = estimate_workload(n, avg, ms_per_comparison).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("classes", w.classes)?;
    out.set_item("comparisons_per_class", w.comparisons_per_class)?;
    out.set_item("comparisons", w.comparisons)?;
    out.set_item("wall_ms", w.wall_ms)?;
    out.set_item("wall", format_hms(w.wall_ms))?;
    Ok(out)
}

type Truth = Vec<(String, String)>;

/// Seeded synthetic corpus. Returns `(signatures, truth)` where `truth`
/// lists `(duplicate_id, source_id)` pairs.
#[pyfunction]
#[pyo3(name = "generate", signature = (
    subjects = 1000,
    dup_fraction = 0.0,
    jitter = 0.0,
    global_offset = 40,
    drop_prob = 0.0,
    min_minutiae = 20,
    max_minutiae = 60,
    extent = 350,
    min_spacing = 15.0,
    seed = 7
))]
#[allow(clippy::too_many_arguments)]
fn py_generate(
    subjects: usize,
    dup_fraction: f64,
    jitter: f64,
    global_offset: u32,
    drop_prob: f64,
    min_minutiae: usize,
    max_minutiae: usize,
    extent: u32,
    min_spacing: f64,
    seed: u64,
) -> PyResult<(Vec<PySignature>, Truth)> {
    let spec = GenSpec {
        subjects,
        min_minutiae,
        max_minutiae,
        width: extent,
        height: extent,
        dup_fraction,
        jitter,
        global_offset,
        drop_prob,
        min_spacing,
        seed,
    };
    let corpus = generate(&spec).map_err(to_py)?;
    let sigs = corpus
        .signatures
        .into_iter()
        .map(|inner| PySignature { inner })
        .collect();
    Ok((sigs, corpus.truth))
}

/// Loads a corpus directory or `id<TAB>path` manifest.
#[pyfunction]
#[pyo3(name = "load_corpus")]
fn py_load_corpus(path: PathBuf) -> PyResult<Vec<PySignature>> {
    let corpus = load_corpus(&path).map_err(to_py)?;
    Ok(corpus
        .into_signatures()
        .into_iter()
        .map(|inner| PySignature { inner })
        .collect())
}

/// `{key: count}` of records per bucket; convenience for quick inspection.
#[pyfunction]
#[pyo3(name = "bucket_sizes")]
fn py_bucket_sizes(table: PyRef<'_, PyClusterTable>) -> BTreeMap<String, usize> {
    table
        .inner
        .buckets()
        .map(|(k, ids)| (k.to_string(), ids.len()))
        .collect()
}

#[pymodule]
fn pygridprint(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySignature>()?;
    m.add_class::<PyMatchParams>()?;
    m.add_class::<PyClusterTable>()?;
    m.add_function(wrap_pyfunction!(py_compute_index, m)?)?;
    m.add_function(wrap_pyfunction!(py_match_score, m)?)?;
    m.add_function(wrap_pyfunction!(py_identify, m)?)?;
    m.add_function(wrap_pyfunction!(py_deduplicate, m)?)?;
    m.add_function(wrap_pyfunction!(py_exhaustive_dedup, m)?)?;
    m.add_function(wrap_pyfunction!(py_corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(py_fit_regression, m)?)?;
    m.add_function(wrap_pyfunction!(py_predict_avg, m)?)?;
    m.add_function(wrap_pyfunction!(py_estimate_workload, m)?)?;
    m.add_function(wrap_pyfunction!(py_generate, m)?)?;
    m.add_function(wrap_pyfunction!(py_load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(py_bucket_sizes, m)?)?;
    m.add("DEFAULT_GRID_SIZE", gridprint::grid::DEFAULT_GRID_SIZE)?;
    Ok(())
}
