//! Python bindings. Matrices cross the boundary as lists of rows and labels
//! as lists of ints; training data passed to the fitting functions is
//! expected to be centered already (see `center`).

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use spca_core::classify::{self, KernelSpec};
use spca_core::cli::{self, ClassifierKind, DataSource, PipelineMethod, RunConfig, SyntheticSpec, TableFormat, TableOptions};
use spca_core::datamat::{self, CenteredDataset, DataMatrix, LabelVector};
use spca_core::metrics::{self, ClassificationReport};
use spca_core::prox::{self, Method, SolverConfig, Step};
use spca_core::spca::{self as core_spca, ColumnFlag, LoadingMatrix, SpcaReport};
use spca_core::Error;

fn to_py(e: Error) -> PyErr {
    match e.root() {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::InvalidInput(_) | Error::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DataMatrix> {
    DataMatrix::from_rows(&rows).map_err(to_py)
}

fn centered(rows: Vec<Vec<f64>>) -> PyResult<CenteredDataset> {
    Ok(CenteredDataset::assume_centered(matrix(rows)?))
}

/// Labels with the class count taken from `classes` or `1 + max(labels)`.
fn labels(values: Vec<usize>, classes: Option<usize>) -> PyResult<LabelVector> {
    match classes {
        Some(c) => LabelVector::new(values, c),
        None => LabelVector::from_labels(values),
    }
    .map_err(to_py)
}

fn parse_method(name: &str) -> PyResult<Method> {
    match name {
        "ista" => Ok(Method::Ista),
        "fista" => Ok(Method::Fista),
        other => Err(PyValueError::new_err(format!("method must be 'ista' or 'fista', got {other:?}"))),
    }
}

fn kernel(name: &str, sigma: Option<f64>) -> PyResult<KernelSpec> {
    match name {
        "linear" => Ok(KernelSpec::Linear),
        "rbf" => {
            let sigma = sigma.ok_or_else(|| PyValueError::new_err("the rbf kernel needs sigma"))?;
            KernelSpec::rbf(sigma).map_err(to_py)
        }
        other => Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
    }
}

/// Elementwise soft-thresholding `sign(v)·max(|v| − tau, 0)`.
#[pyfunction]
fn soft_threshold(v: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    let out = prox::soft_threshold(&DVector::from_vec(v), tau).map_err(to_py)?;
    Ok(out.as_slice().to_vec())
}

/// Gaussian classes around orthogonal means; returns `(rows, labels)`.
#[pyfunction]
#[pyo3(signature = (classes, per_class, dims, separation, seed=0))]
fn generate_synthetic(
    classes: usize,
    per_class: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let (x, y) = datamat::generate_synthetic(classes, per_class, dims, separation, seed).map_err(to_py)?;
    Ok((x.to_rows(), y.as_slice().to_vec()))
}

/// Subtracts the training column mean from both sets; returns
/// `(train, test, mean)`.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn center(train: Vec<Vec<f64>>, test: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)> {
    let (a, b) = datamat::center(&matrix(train)?, &matrix(test)?).map_err(to_py)?;
    Ok((a.data.to_rows(), b.data.to_rows(), a.mean.as_slice().to_vec()))
}

/// p×d loading matrix with per-column unit/zero flags.
#[pyclass(name = "Loadings", module = "spca")]
#[derive(Clone)]
struct PyLoadings {
    inner: LoadingMatrix,
}

#[pymethods]
impl PyLoadings {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: LoadingMatrix::read(path).map_err(to_py)?,
        })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(to_py)
    }

    /// Loadings as rows (p lists of length d).
    fn rows(&self) -> Vec<Vec<f64>> {
        let m = self.inner.matrix();
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.inner.cols() {
            return Err(PyValueError::new_err(format!("column {j} out of range")));
        }
        Ok(self.inner.column(j).as_slice().to_vec())
    }

    fn flags(&self) -> Vec<&'static str> {
        self.inner
            .flags()
            .iter()
            .map(|f| match f {
                ColumnFlag::Unit => "unit",
                ColumnFlag::Zero => "zero",
            })
            .collect()
    }

    fn nonzeros(&self) -> Vec<usize> {
        self.inner.nonzeros()
    }

    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method().tag()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.rows(), self.inner.cols())
    }

    /// Scores `X·V` for centered rows `x`.
    fn transform(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        Ok(core_spca::transform(&centered(x)?, &self.inner).map_err(to_py)?.to_rows())
    }

    fn __repr__(&self) -> String {
        format!(
            "Loadings(method={:?}, shape=({}, {}), active={})",
            self.inner.method().tag(),
            self.inner.rows(),
            self.inner.cols(),
            self.inner.active_columns()
        )
    }
}

/// Top-d principal directions of centered rows.
#[pyfunction]
fn fit_pca(train: Vec<Vec<f64>>, d: usize) -> PyResult<PyLoadings> {
    Ok(PyLoadings {
        inner: core_spca::fit_pca(&centered(train)?, d).map_err(to_py)?,
    })
}

/// Summary of a sparse PCA fit.
#[pyclass(name = "SpcaReport", module = "spca", get_all)]
struct PySpcaReport {
    loadings: PyLoadings,
    iterations: Vec<usize>,
    converged: Vec<bool>,
    nonzeros: Vec<usize>,
    stopped_early: bool,
    total_wall_seconds: f64,
}

impl From<SpcaReport> for PySpcaReport {
    fn from(r: SpcaReport) -> Self {
        Self {
            iterations: r.traces.iter().map(|t| t.iterations).collect(),
            converged: r.traces.iter().map(|t| t.converged).collect(),
            nonzeros: r.nonzeros,
            stopped_early: r.stopped_early,
            total_wall_seconds: r.total_wall_seconds,
            loadings: PyLoadings { inner: r.loadings },
        }
    }
}

/// Sequential sparse components of centered rows.
///
/// `step=None` picks `1/(2·λ_max(DᵀD))` per component.
#[pyfunction]
#[pyo3(signature = (train, d, lam, method="fista", step=None, tol=1e-6, max_iter=1000, seed=0))]
#[allow(clippy::too_many_arguments)]
fn fit_sparse_pca(
    train: Vec<Vec<f64>>,
    d: usize,
    lam: f64,
    method: &str,
    step: Option<f64>,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PyResult<PySpcaReport> {
    let config = SolverConfig {
        step: step.map_or(Step::Auto, Step::Fixed),
        tol,
        max_iter,
        seed,
        ..SolverConfig::default()
    };
    let report = core_spca::fit_sparse_pca(&centered(train)?, d, lam, parse_method(method)?, &config).map_err(to_py)?;
    Ok(report.into())
}

#[pyfunction]
#[pyo3(signature = (train, labels, test, k=1))]
fn nn_classify(train: Vec<Vec<f64>>, labels: Vec<usize>, test: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<usize>> {
    let pred = classify::nn_classify(&matrix(train)?, &self::labels(labels, None)?, &matrix(test)?, k).map_err(to_py)?;
    Ok(pred.as_slice().to_vec())
}

/// Kernel ridge regression on one-hot targets.
#[pyclass(name = "KrrModel", module = "spca")]
struct PyKrrModel {
    inner: classify::KrrModel,
}

#[pymethods]
impl PyKrrModel {
    #[new]
    #[pyo3(signature = (train, labels, kernel="linear", sigma=None, gamma=0.1, classes=None))]
    fn new(
        train: Vec<Vec<f64>>,
        labels: Vec<usize>,
        kernel: &str,
        sigma: Option<f64>,
        gamma: f64,
        classes: Option<usize>,
    ) -> PyResult<Self> {
        let spec = self::kernel(kernel, sigma)?;
        let inner = classify::krr_fit(&matrix(train)?, &self::labels(labels, classes)?, &spec, gamma).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn predict(&self, test: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        Ok(classify::krr_predict(&self.inner, &matrix(test)?).map_err(to_py)?.as_slice().to_vec())
    }

    #[getter]
    fn classes(&self) -> usize {
        self.inner.classes()
    }

    /// Dual coefficients as rows (n lists of length C).
    fn alpha(&self) -> Vec<Vec<f64>> {
        let a: &DMatrix<f64> = &self.inner.alpha;
        (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
    }
}

fn report(pred: Vec<usize>, truth: Vec<usize>, classes: Option<usize>) -> PyResult<ClassificationReport> {
    let c = classes.unwrap_or_else(|| 1 + pred.iter().chain(&truth).copied().max().unwrap_or(0));
    ClassificationReport::new(&labels(pred, Some(c))?, &labels(truth, Some(c))?, c).map_err(to_py)
}

/// One-vs-rest accuracy `Σ(tp + tn) / (n·C)`.
#[pyfunction]
#[pyo3(signature = (pred, truth, classes=None))]
fn q_accuracy(pred: Vec<usize>, truth: Vec<usize>, classes: Option<usize>) -> PyResult<f64> {
    Ok(report(pred, truth, classes)?.q_accuracy)
}

#[pyfunction]
#[pyo3(signature = (pred, truth, classes=None))]
fn plain_accuracy(pred: Vec<usize>, truth: Vec<usize>, classes: Option<usize>) -> PyResult<f64> {
    Ok(report(pred, truth, classes)?.plain_accuracy)
}

/// Percentage with two decimals, rounding half up.
#[pyfunction]
fn format_percent(fraction: f64) -> String {
    metrics::format_percent(fraction)
}

/// Runs the benchmark grid on generated data and returns the CSV table.
#[pyfunction]
#[pyo3(signature = (
    methods, d_list, classifier="nn", lam=None, kernel="linear", sigma=None, gamma=0.1,
    classes=15, per_class=8, test_per_class=3, dims=1024, separation=10.0, seed=0, timing=false
))]
#[allow(clippy::too_many_arguments)]
fn run_synthetic_grid(
    methods: Vec<String>,
    d_list: Vec<usize>,
    classifier: &str,
    lam: Option<f64>,
    kernel: &str,
    sigma: Option<f64>,
    gamma: f64,
    classes: usize,
    per_class: usize,
    test_per_class: usize,
    dims: usize,
    separation: f64,
    seed: u64,
    timing: bool,
) -> PyResult<String> {
    let mut base = RunConfig::new(DataSource::Synthetic(SyntheticSpec {
        classes,
        per_class,
        test_per_class,
        dims,
        separation,
        seed,
    }));
    base.classifier = classifier.parse::<ClassifierKind>().map_err(to_py)?;
    base.lambda = lam;
    base.kernel = self::kernel(kernel, sigma)?;
    base.gamma = gamma;
    base.seed = seed;
    let methods = methods
        .iter()
        .map(|m| m.parse::<PipelineMethod>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let rows = cli::run_grid(&base, &d_list, &methods, false).map_err(to_py)?;
    cli::render_table(&rows, TableOptions { format: TableFormat::Csv, timing }).map_err(to_py)
}

#[pymodule]
pub fn spca(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLoadings>()?;
    m.add_class::<PySpcaReport>()?;
    m.add_class::<PyKrrModel>()?;
    m.add_function(wrap_pyfunction!(soft_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(center, m)?)?;
    m.add_function(wrap_pyfunction!(fit_pca, m)?)?;
    m.add_function(wrap_pyfunction!(fit_sparse_pca, m)?)?;
    m.add_function(wrap_pyfunction!(nn_classify, m)?)?;
    m.add_function(wrap_pyfunction!(q_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(plain_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(format_percent, m)?)?;
    m.add_function(wrap_pyfunction!(run_synthetic_grid, m)?)?;
    m.add("CSV_HEADER", cli::CSV_HEADER)?;
    Ok(())
}
