//! Python bindings. The extension module is named `sevpred`.
//!
//! Every call that fails raises one of `ConfigError`, `DataError` or
//! `NumericError`, all subclasses of `SevpredError`.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sevpred::config::{ModelKind, RunConfig};
use sevpred::features::select_variables as core_select;
use sevpred::metrics::{confusion, Averaging, MetricsReport};
use sevpred::model_io::{load_model, save_model, SavedModel};
use sevpred::synth::{calibrate_reference, render_stats_table, summarize};
use sevpred::{balance, pipeline, report, Dataset, EncodedMatrix, ErrorCategory, NUM_CLASSES};

create_exception!(sevpred, SevpredError, PyException);
create_exception!(sevpred, ConfigError, SevpredError);
create_exception!(sevpred, DataError, SevpredError);
create_exception!(sevpred, NumericError, SevpredError);

fn to_py(err: sevpred::Error) -> PyErr {
    let msg = err.to_string();
    match err.category() {
        ErrorCategory::Config => ConfigError::new_err(msg),
        ErrorCategory::Data => DataError::new_err(msg),
        ErrorCategory::Numeric => NumericError::new_err(msg),
    }
}

fn parse_averaging(name: &str) -> PyResult<Averaging> {
    match name {
        "macro" => Ok(Averaging::Macro),
        "weighted" => Ok(Averaging::Weighted),
        other => Err(ConfigError::new_err(format!("unknown averaging `{other}`; expected macro or weighted"))),
    }
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("model", &r.model)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    Ok(d)
}

fn report_from_dict(d: &Bound<'_, PyDict>) -> PyResult<MetricsReport> {
    let field = |key: &str| -> PyResult<Bound<'_, PyAny>> {
        d.get_item(key)?.ok_or_else(|| DataError::new_err(format!("report is missing `{key}`")))
    };
    Ok(MetricsReport {
        model: field("model")?.extract()?,
        accuracy: field("accuracy")?.extract()?,
        precision: field("precision")?.extract()?,
        recall: field("recall")?.extract()?,
    })
}

/// Crash records with fourteen coded predictors and a severity level.
#[pyclass(name = "Dataset", module = "sevpred", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PyDataset { inner: Dataset::parse_csv(text).map_err(to_py)? })
    }

    #[staticmethod]
    fn read_csv(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| to_py(e.into()))?;
        Self::from_csv(&text)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset({} records)", self.inner.len())
    }

    /// Rows as lists of raw predictor codes, in column order.
    fn records(&self) -> Vec<Vec<i32>> {
        self.inner.records().iter().map(|r| r.predictors().to_vec()).collect()
    }

    /// Severity codes 1 to 4; flagged records report their raw code.
    fn severities(&self) -> Vec<i32> {
        self.inner.records().iter().map(|r| r.severity_code()).collect()
    }

    /// Drops flagged records. Returns the cleaned dataset and the number
    /// of records removed.
    fn clean(&self) -> PyResult<(PyDataset, usize)> {
        let (inner, report) = self.inner.clean().map_err(to_py)?;
        Ok((PyDataset { inner }, report.dropped()))
    }

    fn encode(&self, selected: Vec<String>) -> PyResult<PyEncodedMatrix> {
        Ok(PyEncodedMatrix { inner: self.inner.encode(&selected).map_err(to_py)? })
    }

    fn stats_table(&self) -> PyResult<String> {
        Ok(render_stats_table(&summarize(&self.inner).map_err(to_py)?))
    }
}

/// One-hot encoded predictors with class labels.
#[pyclass(name = "EncodedMatrix", module = "sevpred", frozen)]
struct PyEncodedMatrix {
    inner: EncodedMatrix,
}

#[pymethods]
impl PyEncodedMatrix {
    #[getter]
    fn n_rows(&self) -> usize {
        self.inner.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.inner.n_cols()
    }

    fn column_names(&self) -> Vec<String> {
        self.inner.column_names().to_vec()
    }

    fn rows(&self) -> Vec<Vec<u8>> {
        self.inner.rows().map(|r| r.to_vec()).collect()
    }

    /// Zero-based class indices.
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().iter().map(|l| l.index()).collect()
    }

    fn class_counts(&self) -> [usize; NUM_CLASSES] {
        self.inner.class_counts()
    }

    fn select_rows(&self, indices: Vec<usize>) -> PyResult<PyEncodedMatrix> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.inner.n_rows()) {
            return Err(DataError::new_err(format!("row index {bad} out of range")));
        }
        Ok(PyEncodedMatrix { inner: self.inner.select_rows(&indices) })
    }

    #[pyo3(signature = (k = 5, seed = 42))]
    fn oversample(&self, k: usize, seed: u64) -> PyResult<PyEncodedMatrix> {
        Ok(PyEncodedMatrix { inner: balance::oversample(&self.inner, k, seed).map_err(to_py)? })
    }

    fn __repr__(&self) -> String {
        format!("EncodedMatrix({} x {})", self.inner.n_rows(), self.inner.n_cols())
    }
}

/// A fitted classifier of any of the seven kinds.
#[pyclass(name = "Model", module = "sevpred", frozen)]
struct PyModel {
    model: SavedModel,
    loss_history: Vec<f64>,
}

fn model_key(model: &SavedModel) -> &'static str {
    match model {
        SavedModel::Logistic(_) => ModelKind::Lr.key(),
        SavedModel::NaiveBayes(_) => ModelKind::Nb.key(),
        SavedModel::Knn(_) => ModelKind::Knn.key(),
        SavedModel::Tree(_) => ModelKind::Dt.key(),
        SavedModel::Network(n) => n.architecture().key(),
    }
}

#[pymethods]
impl PyModel {
    /// Fits a model of `kind` (lr, nb, knn, dt, rnn, cnn, cnn_rnn).
    /// Hyperparameters come from `config`, a TOML run configuration; only
    /// its model sections are read.
    #[staticmethod]
    #[pyo3(signature = (kind, train, seed = 42, config = None))]
    fn fit(py: Python<'_>, kind: &str, train: &PyEncodedMatrix, seed: u64, config: Option<&str>) -> PyResult<Self> {
        let kind = ModelKind::from_key(kind).ok_or_else(|| ConfigError::new_err(format!("unknown model `{kind}`")))?;
        let config = match config {
            Some(text) => RunConfig::from_toml_str(text).map_err(to_py)?,
            None => RunConfig::default(),
        };
        let (model, loss_history) =
            py.detach(|| pipeline::fit_model(kind, &config, seed, &train.inner)).map_err(to_py)?;
        Ok(PyModel { model, loss_history })
    }

    #[staticmethod]
    fn load(text: &str) -> PyResult<Self> {
        let model = load_model(text).map_err(to_py)?;
        let loss_history = match &model {
            SavedModel::Network(n) => n.loss_history.clone(),
            SavedModel::Logistic(m) => m.loss_history.clone(),
            _ => Vec::new(),
        };
        Ok(PyModel { model, loss_history })
    }

    fn save(&self) -> String {
        save_model(&self.model)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        model_key(&self.model)
    }

    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.loss_history.clone()
    }

    fn predict_proba(&self, row: Vec<f64>) -> PyResult<Vec<f64>> {
        self.model.classifier().predict_proba(&row).map_err(to_py)
    }

    fn predict(&self, py: Python<'_>, matrix: &PyEncodedMatrix) -> PyResult<Vec<usize>> {
        py.detach(|| self.model.classifier().predict_matrix(&matrix.inner)).map_err(to_py)
    }

    #[pyo3(signature = (test, averaging = "macro"))]
    fn evaluate<'py>(&self, py: Python<'py>, test: &PyEncodedMatrix, averaging: &str) -> PyResult<Bound<'py, PyDict>> {
        let averaging = parse_averaging(averaging)?;
        let name = ModelKind::from_key(self.kind()).map(|k| k.display_name()).unwrap_or("model");
        let r = py
            .detach(|| pipeline::evaluate(name, self.model.classifier(), &test.inner, averaging))
            .map_err(to_py)?;
        report_dict(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?})", self.kind())
    }
}

/// Synthetic dataset drawn from the calibrated reference generator.
#[pyfunction]
#[pyo3(signature = (n, seed = 42))]
fn generate(n: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset { inner: sevpred::synth::generate(&calibrate_reference(), n, seed).map_err(to_py)? })
}

/// Extra-trees importance, highest first, as `(name, score)` pairs.
#[pyfunction]
#[pyo3(signature = (dataset, n_trees = 100, seed = 42))]
fn rank_variables(py: Python<'_>, dataset: &PyDataset, n_trees: usize, seed: u64) -> PyResult<Vec<(String, f64)>> {
    let ranking = py.detach(|| pipeline::rank_variables(&dataset.inner, n_trees, seed)).map_err(to_py)?;
    Ok(ranking.scores().to_vec())
}

#[pyfunction]
#[pyo3(signature = (ranking, threshold = 0.025, force_drop = Vec::new()))]
fn select_variables(ranking: Vec<(String, f64)>, threshold: f64, force_drop: Vec<String>) -> PyResult<Vec<String>> {
    let ranking = sevpred::features::ImportanceRanking::new(ranking).map_err(to_py)?;
    core_select(&ranking, threshold, &force_drop).map_err(to_py)
}

/// Accuracy, precision and recall of zero-based class predictions.
#[pyfunction]
#[pyo3(signature = (y_true, y_pred, averaging = "macro", n_classes = NUM_CLASSES))]
fn metrics<'py>(
    py: Python<'py>,
    y_true: Vec<usize>,
    y_pred: Vec<usize>,
    averaging: &str,
    n_classes: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cm = confusion(&y_true, &y_pred, n_classes).map_err(to_py)?;
    let r = MetricsReport::from_confusion("", &cm, parse_averaging(averaging)?).map_err(to_py)?;
    let d = report_dict(py, &r)?;
    d.del_item("model")?;
    Ok(d)
}

/// Runs the whole pipeline from a TOML configuration string and returns
/// one report dict per model. Writes output files when `out_dir` is given.
#[pyfunction]
#[pyo3(signature = (config, out_dir = None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    config: &str,
    out_dir: Option<std::path::PathBuf>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = RunConfig::from_toml_str(config).map_err(to_py)?;
    let output = py
        .detach(|| {
            let output = pipeline::run(&config)?;
            if let Some(dir) = &out_dir {
                pipeline::write_outputs(&output, dir)?;
            }
            Ok::<_, sevpred::Error>(output)
        })
        .map_err(to_py)?;
    output.reports().iter().map(|r| report_dict(py, r)).collect()
}

#[pyfunction]
fn render_table(reports: Vec<Bound<'_, PyDict>>) -> PyResult<String> {
    let reports = reports.iter().map(report_from_dict).collect::<PyResult<Vec<_>>>()?;
    report::render_table(&reports).map_err(to_py)
}

#[pymodule]
#[pyo3(name = "sevpred")]
fn sevpred_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("SevpredError", py.get_type::<SevpredError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericError", py.get_type::<NumericError>())?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEncodedMatrix>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(rank_variables, m)?)?;
    m.add_function(wrap_pyfunction!(select_variables, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(render_table, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
