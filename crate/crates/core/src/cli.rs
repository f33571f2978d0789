//! Benchmark pipeline behind the `spca-bench` binary.
//!
//! A run loads (or generates) a train/test split, centers both sets with the
//! training mean, optionally rescales, fits a reducer, projects both sets,
//! classifies the test set and scores it. Only the reducer fit is timed.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::classify::{krr_fit, krr_predict, nn_classify, KernelSpec};
use crate::datamat::{center, generate_synthetic, load_csv_dataset, CenteredDataset, DataMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::metrics::{format_fixed2, format_percent, timed, ClassificationReport};
use crate::prox::{SolverConfig, Step};
use crate::spca::{fit_pca, fit_sparse_pca, transform, LoadingMatrix, Reducer};

/// Parameters of a generated train/test pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub per_class: usize,
    pub test_per_class: usize,
    pub dims: usize,
    pub separation: f64,
    /// Training set seed; the test set uses `seed + 1`.
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn generate(&self) -> Result<(DataMatrix, LabelVector, DataMatrix, LabelVector)> {
        let (train, train_labels) =
            generate_synthetic(self.classes, self.per_class, self.dims, self.separation, self.seed)?;
        let (test, test_labels) = generate_synthetic(
            self.classes,
            self.test_per_class,
            self.dims,
            self.separation,
            self.seed.wrapping_add(1),
        )?;
        Ok((train, train_labels, test, test_labels))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Files {
        train: PathBuf,
        train_labels: PathBuf,
        test: PathBuf,
        test_labels: PathBuf,
    },
    Synthetic(SyntheticSpec),
}

/// Dimension reduction applied before classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PipelineMethod {
    None,
    Reduce(Reducer),
}

impl PipelineMethod {
    pub fn tag(self) -> &'static str {
        match self {
            PipelineMethod::None => "none",
            PipelineMethod::Reduce(r) => r.tag(),
        }
    }
}

impl FromStr for PipelineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PipelineMethod::None),
            other => other.parse().map(PipelineMethod::Reduce),
        }
    }
}

impl fmt::Display for PipelineMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Nn,
    Krr,
}

impl ClassifierKind {
    pub fn tag(self) -> &'static str {
        match self {
            ClassifierKind::Nn => "nn",
            ClassifierKind::Krr => "krr",
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nn" => Ok(ClassifierKind::Nn),
            "krr" => Ok(ClassifierKind::Krr),
            other => Err(Error::invalid(format!("unknown classifier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Text,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "text" | "text-table" => Ok(TableFormat::Text),
            other => Err(Error::invalid(format!("unknown table format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub method: PipelineMethod,
    pub d: usize,
    /// Required for the sparse reducers.
    pub lambda: Option<f64>,
    pub step: Step,
    pub tol: f64,
    pub max_iter: usize,
    pub classifier: ClassifierKind,
    pub k: usize,
    pub kernel: KernelSpec,
    pub gamma: f64,
    pub seed: u64,
    /// Divide all features by the largest absolute training value.
    pub scale: bool,
}

impl RunConfig {
    /// Defaults for everything except the data source.
    pub fn new(data: DataSource) -> Self {
        let solver = SolverConfig::default();
        Self {
            data,
            method: PipelineMethod::None,
            d: 10,
            lambda: None,
            step: solver.step,
            tol: solver.tol,
            max_iter: solver.max_iter,
            classifier: ClassifierKind::Nn,
            k: 1,
            kernel: KernelSpec::Linear,
            gamma: 0.1,
            seed: 0,
            scale: false,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            step: self.step,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            normalize: true,
            track_objective: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PipelineMethod::Reduce(reducer) = self.method {
            if self.d == 0 {
                return Err(Error::invalid("d must be >= 1"));
            }
            if reducer != Reducer::Pca {
                match self.lambda {
                    None => return Err(Error::invalid(format!("--lambda is required for {reducer}"))),
                    Some(l) if !(l >= 0.0 && l.is_finite()) => {
                        return Err(Error::invalid(format!("lambda must be finite and >= 0, got {l}")))
                    }
                    _ => {}
                }
                self.solver_config().validate()?;
            }
        }
        match self.classifier {
            ClassifierKind::Nn if self.k == 0 => return Err(Error::invalid("k must be >= 1")),
            ClassifierKind::Krr => {
                self.kernel.validate()?;
                if !(self.gamma > 0.0 && self.gamma.is_finite()) {
                    return Err(Error::invalid(format!("gamma must be finite and > 0, got {}", self.gamma)));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Row label, e.g. `pca+nn`.
    pub fn label(&self) -> String {
        format!("{}+{}", self.method, self.classifier.tag())
    }
}

/// Centered (and possibly rescaled) train/test sets ready for reduction.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: CenteredDataset,
    pub test: CenteredDataset,
    pub train_labels: LabelVector,
    pub test_labels: LabelVector,
    pub classes: usize,
}

pub fn prepare(source: &DataSource, scale: bool) -> Result<PreparedData> {
    let (train, train_labels, test, test_labels) = match source {
        DataSource::Files {
            train,
            train_labels,
            test,
            test_labels,
        } => {
            let (a, la) = load_csv_dataset(train, train_labels)?;
            let (b, lb) = load_csv_dataset(test, test_labels)?;
            (a, la, b, lb)
        }
        DataSource::Synthetic(spec) => spec.generate()?,
    };
    let factor = scale
        .then(|| train.as_matrix().amax())
        .filter(|m| *m > 0.0)
        .map(|m| 1.0 / m);

    let (mut train_c, mut test_c) = center(&train, &test).map_err(|e| e.in_stage("center"))?;
    if let Some(f) = factor {
        train_c.data = train_c.data.scaled(f)?;
        test_c.data = test_c.data.scaled(f)?;
        train_c.mean *= f;
        test_c.mean *= f;
    }
    let classes = train_labels.classes().max(test_labels.classes());
    Ok(PreparedData {
        train: train_c,
        test: test_c,
        train_labels: train_labels.with_classes(classes)?,
        test_labels: test_labels.with_classes(classes)?,
        classes,
    })
}

/// One line of a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub method: String,
    pub d: Option<usize>,
    pub lambda: Option<f64>,
    pub q_accuracy: f64,
    pub plain_accuracy: f64,
    pub fit_seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Produced while other cells ran concurrently.
    pub parallel: bool,
    pub error: Option<String>,
}

impl BenchmarkRow {
    fn failed(config: &RunConfig, err: &Error) -> Self {
        let (d, lambda) = cell_params(config);
        Self {
            method: config.label(),
            d,
            lambda,
            q_accuracy: f64::NAN,
            plain_accuracy: f64::NAN,
            fit_seconds: f64::NAN,
            iterations: 0,
            converged: false,
            parallel: false,
            error: Some(err.to_string()),
        }
    }
}

fn cell_params(config: &RunConfig) -> (Option<usize>, Option<f64>) {
    match config.method {
        PipelineMethod::None => (None, None),
        PipelineMethod::Reduce(Reducer::Pca) => (Some(config.d), None),
        PipelineMethod::Reduce(_) => (Some(config.d), config.lambda),
    }
}

/// Reducer output plus what the row needs to report about it.
pub struct Reduction {
    pub loadings: Option<LoadingMatrix>,
    pub fit_seconds: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn reduce(config: &RunConfig, data: &PreparedData) -> Result<(Reduction, DataMatrix, DataMatrix)> {
    let reducer = match config.method {
        PipelineMethod::None => {
            let r = Reduction {
                loadings: None,
                fit_seconds: 0.0,
                iterations: 0,
                converged: true,
            };
            return Ok((r, data.train.data.clone(), data.test.data.clone()));
        }
        PipelineMethod::Reduce(r) => r,
    };
    let (fit, seconds) = match reducer.solver_method() {
        None => timed(|| fit_pca(&data.train, config.d).map(|l| (l, 0, true))),
        Some(method) => {
            let lambda = config.lambda.unwrap_or_default();
            let solver = config.solver_config();
            timed(|| {
                fit_sparse_pca(&data.train, config.d, lambda, method, &solver)
                    .map(|r| (r.loadings.clone(), r.total_iterations(), r.converged()))
            })
        }
    };
    let (loadings, iterations, converged) = fit?;
    let train = transform(&data.train, &loadings)?;
    let test = transform(&data.test, &loadings)?;
    let r = Reduction {
        loadings: Some(loadings),
        fit_seconds: seconds,
        iterations,
        converged,
    };
    Ok((r, train, test))
}

fn classify(config: &RunConfig, data: &PreparedData, train: &DataMatrix, test: &DataMatrix) -> Result<LabelVector> {
    match config.classifier {
        ClassifierKind::Nn => nn_classify(train, &data.train_labels, test, config.k),
        ClassifierKind::Krr => {
            let model = krr_fit(train, &data.train_labels, &config.kernel, config.gamma)?;
            krr_predict(&model, test)
        }
    }
}

/// Runs one configuration on already prepared data.
pub fn run_prepared(config: &RunConfig, data: &PreparedData) -> Result<(BenchmarkRow, Option<LoadingMatrix>)> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let (reduction, train, test) = reduce(config, data).map_err(|e| e.in_stage("reduce"))?;
    let pred = classify(config, data, &train, &test).map_err(|e| e.in_stage("classify"))?;
    let report = ClassificationReport::new(&pred, &data.test_labels, data.classes).map_err(|e| e.in_stage("score"))?;
    let (d, lambda) = cell_params(config);
    let row = BenchmarkRow {
        method: config.label(),
        d,
        lambda,
        q_accuracy: report.q_accuracy,
        plain_accuracy: report.plain_accuracy,
        fit_seconds: reduction.fit_seconds,
        iterations: reduction.iterations,
        converged: reduction.converged,
        parallel: false,
        error: None,
    };
    Ok((row, reduction.loadings))
}

/// Load, reduce, classify and score one configuration.
pub fn run_pipeline(config: &RunConfig) -> Result<BenchmarkRow> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let data = prepare(&config.data, config.scale).map_err(|e| e.in_stage("load"))?;
    run_prepared(config, &data).map(|(row, _)| row)
}

/// Runs every (method, d) cell, methods outer and d inner.
///
/// `none` ignores d and contributes a single row. A failing cell becomes an
/// error row; the remaining cells still run.
pub fn run_grid(base: &RunConfig, d_list: &[usize], methods: &[PipelineMethod], parallel: bool) -> Result<Vec<BenchmarkRow>> {
    if d_list.is_empty() {
        return Err(Error::invalid("d list must not be empty"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("method list must not be empty"));
    }
    let data = prepare(&base.data, base.scale).map_err(|e| e.in_stage("load"))?;

    let mut cells = Vec::new();
    for &method in methods {
        let ds: &[usize] = if method == PipelineMethod::None { &d_list[..1] } else { d_list };
        for &d in ds {
            cells.push(RunConfig {
                method,
                d,
                ..base.clone()
            });
        }
    }
    let run_cell = |cell: &RunConfig| match run_prepared(cell, &data) {
        Ok((row, _)) => row,
        Err(e) => BenchmarkRow::failed(cell, &e),
    };
    let rows = if parallel {
        cells
            .par_iter()
            .map(|c| BenchmarkRow {
                parallel: true,
                ..run_cell(c)
            })
            .collect()
    } else {
        cells.iter().map(run_cell).collect()
    };
    Ok(rows)
}

pub const CSV_HEADER: &str = "method,d,lambda,q_accuracy,plain_accuracy,fit_seconds,iterations,converged";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableOptions {
    pub format: TableFormat,
    /// When false, `fit_seconds` is written as `-` so output depends only on
    /// the inputs.
    pub timing: bool,
}

impl TableOptions {
    pub fn new(format: TableFormat) -> Self {
        Self { format, timing: true }
    }
}

fn row_fields(row: &BenchmarkRow, timing: bool) -> Vec<String> {
    let mut method = row.method.clone();
    if row.parallel {
        method.push_str("[parallel]");
    }
    let d = row.d.map(|d| d.to_string()).unwrap_or_default();
    let lambda = row.lambda.map(|l| format!("{l}")).unwrap_or_default();
    if row.error.is_some() {
        return vec![method, d, lambda, String::new(), String::new(), String::new(), String::new(), "error".into()];
    }
    let seconds = if timing { format_fixed2(row.fit_seconds) } else { "-".into() };
    vec![
        method,
        d,
        lambda,
        format_percent(row.q_accuracy),
        format_percent(row.plain_accuracy),
        seconds,
        row.iterations.to_string(),
        row.converged.to_string(),
    ]
}

/// Renders rows as CSV or as an aligned text table.
pub fn render_table(rows: &[BenchmarkRow], options: TableOptions) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("no rows to emit"));
    }
    let body: Vec<Vec<String>> = rows.iter().map(|r| row_fields(r, options.timing)).collect();
    let mut out = String::new();
    match options.format {
        TableFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for fields in &body {
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        TableFormat::Text => {
            let header: Vec<String> = CSV_HEADER.split(',').map(String::from).collect();
            let mut widths: Vec<usize> = header.iter().map(String::len).collect();
            for fields in &body {
                for (w, f) in widths.iter_mut().zip(fields) {
                    *w = (*w).max(f.len());
                }
            }
            let line = |fields: &[String]| -> String {
                let cells: Vec<String> = fields
                    .iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(i, (f, &w))| if i == 0 { format!("{f:<w$}") } else { format!("{f:>w$}") })
                    .collect();
                cells.join("  ").trim_end().to_string()
            };
            out.push_str(&line(&header));
            out.push('\n');
            let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(rule));
            out.push('\n');
            for (fields, row) in body.iter().zip(rows) {
                out.push_str(&line(fields));
                if let Some(e) = &row.error {
                    out.push_str("  # ");
                    out.push_str(e);
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn emit_table(rows: &[BenchmarkRow], options: TableOptions, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = render_table(rows, options)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
