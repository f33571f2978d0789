//! Sample matrices, labels, centering and the synthetic data generator.
//!
//! A [`DataMatrix`] holds one vectorized sample per row. Images are turned
//! into rows with [`vectorize_image`], which concatenates the grid rows from
//! top to bottom.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, ParseIssue, Result};

/// An n×p matrix of finite values, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::invalid(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::invalid(format!(
                "non-finite entry at row {row}, column {col}"
            )));
        }
        Ok(Self { values })
    }

    /// Builds a matrix from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn row_vec(&self, row: usize) -> Vec<f64> {
        self.values.row(row).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.nrows()).map(|i| self.row_vec(i)).collect()
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.values * factor)
    }

    /// Writes the matrix as headerless CSV with round-trip float formatting.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for i in 0..self.nrows() {
            let line: Vec<String> = self.values.row(i).iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Class identifiers in `[0, classes)`, one per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, classes: usize) -> Result<Self> {
        if classes == 0 {
            return Err(Error::invalid("class count must be at least 1"));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::invalid(format!(
                "label {l} at index {i} is out of range for {classes} classes"
            )));
        }
        Ok(Self { labels, classes })
    }

    /// Uses `1 + max(label)` as the class count.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().max().map_or(1, |m| m + 1);
        Self::new(labels, classes)
    }

    /// Maps arbitrary names to contiguous ids in order of first appearance.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> (Self, Vec<String>) {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut alphabet = Vec::new();
        let labels = names
            .iter()
            .map(|name| {
                let name = name.as_ref();
                *ids.entry(name).or_insert_with(|| {
                    alphabet.push(name.to_string());
                    alphabet.len() - 1
                })
            })
            .collect();
        let classes = alphabet.len().max(1);
        (Self { labels, classes }, alphabet)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    /// Same labels with a (larger or equal) class count.
    pub fn with_classes(&self, classes: usize) -> Result<Self> {
        Self::new(self.labels.clone(), classes)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for l in &self.labels {
            out.push_str(&l.to_string());
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// A data matrix with the training column mean removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredDataset {
    pub data: DataMatrix,
    pub mean: DVector<f64>,
}

impl CenteredDataset {
    /// Wraps data that is already centered (mean is recorded as zero).
    pub fn assume_centered(data: DataMatrix) -> Self {
        let mean = DVector::zeros(data.ncols());
        Self { data, mean }
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.data.as_matrix()
    }
}

/// Concatenates the rows of an h×w grid into one row of length h·w.
pub fn vectorize_image(grid: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (h, w) = grid.shape();
    if h == 0 || w == 0 {
        return Err(Error::invalid(format!("empty image grid {h}x{w}")));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("image grid has non-finite entries"));
    }
    Ok(DVector::from_fn(h * w, |k, _| grid[(k / w, k % w)]))
}

/// Inverse of [`vectorize_image`].
pub fn unvectorize_image(row: &DVector<f64>, h: usize, w: usize) -> Result<DMatrix<f64>> {
    if h == 0 || w == 0 || row.len() != h * w {
        return Err(Error::invalid(format!(
            "cannot reshape length {} into {h}x{w}",
            row.len()
        )));
    }
    Ok(DMatrix::from_fn(h, w, |i, j| row[i * w + j]))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, issue: ParseIssue) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        issue,
    }
}

/// Non-blank lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Reads a headerless numeric CSV, one sample per row.
pub fn load_csv_matrix(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let row = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        parse_error(path, line_no, ParseIssue::NonNumeric(cell.to_string()))
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    line_no,
                    ParseIssue::Ragged {
                        expected: first.len(),
                        found: row.len(),
                    },
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, ParseIssue::Empty));
    }
    DataMatrix::from_rows(&rows)
}

/// Reads one non-negative integer label per line.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut labels = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let label = line.parse::<usize>().map_err(|_| {
            parse_error(path, line_no, ParseIssue::NonNumeric(line.to_string()))
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_error(path, 1, ParseIssue::Empty));
    }
    LabelVector::from_labels(labels)
}

/// Loads a data CSV and its aligned label file.
pub fn load_csv_dataset(
    data_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(DataMatrix, LabelVector)> {
    let data = load_csv_matrix(&data_path)?;
    let labels = load_labels(&labels_path)?;
    if data.nrows() != labels.len() {
        let line = data.nrows().min(labels.len()) + 1;
        return Err(parse_error(
            labels_path.as_ref(),
            line,
            ParseIssue::RowCountMismatch {
                data_rows: data.nrows(),
                label_rows: labels.len(),
            },
        ));
    }
    Ok((data, labels))
}

/// Subtracts the training column mean from both sets.
pub fn center(train: &DataMatrix, test: &DataMatrix) -> Result<(CenteredDataset, CenteredDataset)> {
    if train.ncols() != test.ncols() {
        return Err(Error::invalid(format!(
            "train has {} columns, test has {}",
            train.ncols(),
            test.ncols()
        )));
    }
    let mean = train.as_matrix().row_mean().transpose();
    let shift = |m: &DataMatrix| -> Result<DataMatrix> {
        let mut out = m.as_matrix().clone();
        for mut row in out.row_iter_mut() {
            row -= mean.transpose();
        }
        DataMatrix::new(out)
    };
    Ok((
        CenteredDataset {
            data: shift(train)?,
            mean: mean.clone(),
        },
        CenteredDataset {
            data: shift(test)?,
            mean,
        },
    ))
}

/// Gaussian class clouds around pairwise-orthogonal means.
///
/// Class `c` has mean `separation * e_c` (the c-th standard basis vector) and
/// unit isotropic noise. Rows are grouped by class.
pub fn generate_synthetic(
    classes: usize,
    per_class: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<(DataMatrix, LabelVector)> {
    if classes == 0 || per_class == 0 || dims == 0 {
        return Err(Error::invalid("classes, per_class and dims must be >= 1"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid(format!("separation must be >= 0, got {separation}")));
    }
    if classes > dims {
        return Err(Error::invalid(format!(
            "cannot place {classes} orthogonal class means in {dims} dimensions"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = classes * per_class;
    let mut values = DMatrix::zeros(n, dims);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i / per_class;
        for j in 0..dims {
            let noise: f64 = StandardNormal.sample(&mut rng);
            values[(i, j)] = noise + if j == class { separation } else { 0.0 };
        }
        labels.push(class);
    }
    Ok((DataMatrix::new(values)?, LabelVector::new(labels, classes)?))
}

/// Writes a matrix and labels next to each other (helper for `synth`).
pub fn write_dataset(
    data: &DataMatrix,
    labels: &LabelVector,
    data_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    data.write_csv(data_path)?;
    labels.write(labels_path)
}
