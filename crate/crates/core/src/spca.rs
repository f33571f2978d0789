//! Sparse PCA by sequential extraction with projection deflation, and the
//! classical PCA baseline.
//!
//! Each sparse component maximizes `xᵀDᵀDx − λ‖x‖₁` over the unit sphere
//! using the [`prox`](crate::prox) solvers. After a component `v` is found
//! the working matrix becomes `D(I − vvᵀ)`, so later components see none of
//! the variance along `v`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::datamat::{CenteredDataset, DataMatrix};
use crate::error::{Error, Result};
use crate::prox::{self, canonical_sign, random_unit_vector, Method, SolverConfig, SolverTrace, SparsePcaProblem};

/// Entries with magnitude above this count as nonzero loadings.
pub const NONZERO_EPS: f64 = 1e-10;

const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reducer {
    Pca,
    IstaSpca,
    FistaSpca,
}

impl Reducer {
    pub fn tag(self) -> &'static str {
        match self {
            Reducer::Pca => "pca",
            Reducer::IstaSpca => "ista-spca",
            Reducer::FistaSpca => "fista-spca",
        }
    }

    pub fn solver_method(self) -> Option<Method> {
        match self {
            Reducer::Pca => None,
            Reducer::IstaSpca => Some(Method::Ista),
            Reducer::FistaSpca => Some(Method::Fista),
        }
    }
}

impl fmt::Display for Reducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Reducer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Reducer::Pca),
            "ista-spca" => Ok(Reducer::IstaSpca),
            "fista-spca" => Ok(Reducer::FistaSpca),
            other => Err(Error::invalid(format!("unknown reducer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnFlag {
    Unit,
    Zero,
}

/// p×d loading vectors, each unit-norm or flagged as an all-zero column.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingMatrix {
    loadings: DMatrix<f64>,
    flags: Vec<ColumnFlag>,
    method: Reducer,
}

impl LoadingMatrix {
    /// Validates the unit-norm / zero-column contract.
    pub fn new(loadings: DMatrix<f64>, flags: Vec<ColumnFlag>, method: Reducer) -> Result<Self> {
        if flags.len() != loadings.ncols() {
            return Err(Error::invalid(format!(
                "{} flags for {} columns",
                flags.len(),
                loadings.ncols()
            )));
        }
        for (j, flag) in flags.iter().enumerate() {
            let col = loadings.column(j);
            let ok = match flag {
                ColumnFlag::Unit => (col.norm() - 1.0).abs() <= UNIT_NORM_TOL,
                ColumnFlag::Zero => col.iter().all(|&v| v == 0.0),
            };
            if !ok {
                return Err(Error::invalid(format!("column {j} does not match its {flag:?} flag")));
            }
        }
        Ok(Self { loadings, flags, method })
    }

    pub fn rows(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn cols(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    pub fn flags(&self) -> &[ColumnFlag] {
        &self.flags
    }

    pub fn method(&self) -> Reducer {
        self.method
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.loadings.column(j).into_owned()
    }

    /// Number of unit (non-zero-flagged) columns.
    pub fn active_columns(&self) -> usize {
        self.flags.iter().filter(|f| **f == ColumnFlag::Unit).count()
    }

    pub fn nonzeros(&self) -> Vec<usize> {
        (0..self.cols())
            .map(|j| self.loadings.column(j).iter().filter(|v| v.abs() > NONZERO_EPS).count())
            .collect()
    }

    /// Writes the loadings as CSV (p rows, d columns) plus a `.flags` sidecar.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut csv = String::new();
        for i in 0..self.rows() {
            let line: Vec<String> = self.loadings.row(i).iter().map(|v| format!("{v:?}")).collect();
            csv.push_str(&line.join(","));
            csv.push('\n');
        }
        fs::write(path, csv).map_err(|e| Error::io(path, e))?;

        let sidecar = flags_path(path);
        let mut meta = format!("method {}\n", self.method);
        for flag in &self.flags {
            meta.push_str(match flag {
                ColumnFlag::Unit => "unit\n",
                ColumnFlag::Zero => "zero\n",
            });
        }
        fs::write(&sidecar, meta).map_err(|e| Error::io(&sidecar, e))
    }

    /// Reads a matrix written by [`LoadingMatrix::write`].
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let values = crate::datamat::load_csv_matrix(path)?;
        let sidecar = flags_path(path);
        let meta = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let mut lines = meta.lines();
        let method = lines
            .next()
            .and_then(|l| l.strip_prefix("method "))
            .ok_or_else(|| Error::invalid(format!("{}: missing method line", sidecar.display())))?
            .parse()?;
        let flags = lines
            .map(|l| match l.trim() {
                "unit" => Ok(ColumnFlag::Unit),
                "zero" => Ok(ColumnFlag::Zero),
                other => Err(Error::invalid(format!("unknown column flag {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(values.into_matrix(), flags, method)
    }
}

fn flags_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".flags");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpcaReport {
    pub loadings: LoadingMatrix,
    pub traces: Vec<SolverTrace>,
    pub nonzeros: Vec<usize>,
    pub total_wall_seconds: f64,
    /// True when a component collapsed to zero and extraction stopped early.
    pub stopped_early: bool,
}

impl SpcaReport {
    pub fn total_iterations(&self) -> usize {
        self.traces.iter().map(|t| t.iterations).sum()
    }

    /// Every extracted component met the tolerance.
    pub fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.converged || t.collapsed_to_zero)
    }
}

/// Top-d eigenvectors of `DᵀD`; columns beyond the rank are zero-flagged.
pub fn fit_pca(train: &CenteredDataset, d: usize) -> Result<LoadingMatrix> {
    if d == 0 {
        return Err(Error::invalid("component count d must be >= 1"));
    }
    let data = train.matrix();
    let (n, p) = data.shape();
    let mut basis = if p <= n {
        gram_eigenvectors(data, d)
    } else {
        dual_eigenvectors(data, d)
    };
    orthonormalize(&mut basis);

    let mut loadings = DMatrix::zeros(p, d);
    let mut flags = vec![ColumnFlag::Zero; d];
    for (j, mut v) in basis.into_iter().enumerate() {
        canonical_sign(&mut v);
        loadings.set_column(j, &v);
        flags[j] = ColumnFlag::Unit;
    }
    LoadingMatrix::new(loadings, flags, Reducer::Pca)
}

/// Eigenvalues below this fraction of the largest are treated as zero.
fn rank_cutoff(top: f64, n: usize, p: usize) -> f64 {
    top * (n.max(p) as f64) * f64::EPSILON * 8.0
}

fn sorted_eigen(m: DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &val)| (val, eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// Eigenvectors of the p×p Gram `DᵀD` (used when p ≤ n).
fn gram_eigenvectors(data: &DMatrix<f64>, d: usize) -> Vec<DVector<f64>> {
    let pairs = sorted_eigen(data.tr_mul(data));
    let top = pairs.first().map_or(0.0, |p| p.0);
    let cutoff = rank_cutoff(top, data.nrows(), data.ncols());
    pairs
        .into_iter()
        .take(d)
        .take_while(|(val, _)| top > 0.0 && *val > cutoff)
        .map(|(_, v)| v)
        .collect()
}

/// Eigenvectors of `DᵀD` via the n×n matrix `DDᵀ` (used when p > n).
fn dual_eigenvectors(data: &DMatrix<f64>, d: usize) -> Vec<DVector<f64>> {
    let pairs = sorted_eigen(data * data.transpose());
    let top = pairs.first().map_or(0.0, |p| p.0);
    let cutoff = rank_cutoff(top, data.nrows(), data.ncols());
    pairs
        .into_iter()
        .take(d)
        .take_while(|(val, _)| top > 0.0 && *val > cutoff)
        .map(|(_, u)| {
            let v = data.tr_mul(&u);
            let norm = v.norm();
            v / norm
        })
        .collect()
}

/// Two rounds of modified Gram-Schmidt.
fn orthonormalize(basis: &mut [DVector<f64>]) {
    for _ in 0..2 {
        for j in 0..basis.len() {
            let (done, rest) = basis.split_at_mut(j);
            let v = &mut rest[0];
            for q in done.iter() {
                let proj = q.dot(v);
                v.axpy(-proj, q, 1.0);
            }
            let norm = v.norm();
            *v /= norm;
        }
    }
}

/// Projection deflation `D(I − vvᵀ)`.
pub fn deflate(data: &DMatrix<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    if v.len() != data.ncols() {
        return Err(Error::invalid(format!(
            "vector has length {}, matrix has {} columns",
            v.len(),
            data.ncols()
        )));
    }
    let norm = v.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!("deflation vector must be unit-norm, has norm {norm}")));
    }
    let dv = data * v;
    let mut out = data.clone();
    out.ger(-1.0, &dv, v, 1.0);
    Ok(out)
}

/// Sequential sparse components with projection deflation.
///
/// Component `k` starts from a random unit vector seeded with
/// `config.seed + k`. A component that shrinks to zero ends extraction and
/// the remaining columns are zero-flagged.
pub fn fit_sparse_pca(
    train: &CenteredDataset,
    d: usize,
    lambda: f64,
    method: Method,
    config: &SolverConfig,
) -> Result<SpcaReport> {
    if d == 0 {
        return Err(Error::invalid("component count d must be >= 1"));
    }
    config.validate()?;
    let start = Instant::now();
    let p = train.ncols();
    let mut working = train.matrix().clone();
    let mut loadings = DMatrix::zeros(p, d);
    let mut flags = vec![ColumnFlag::Zero; d];
    let mut traces = Vec::with_capacity(d);
    let mut stopped_early = false;

    for k in 0..d {
        if stopped_early {
            traces.push(SolverTrace {
                iterations: 0,
                displacement: 0.0,
                objective_history: None,
                wall_seconds: 0.0,
                converged: false,
                collapsed_to_zero: true,
                step: 0.0,
            });
            continue;
        }
        let component = |e: Error| Error::Component { index: k, source: Box::new(e) };
        let problem = SparsePcaProblem::new(&working, lambda)?;
        let x0 = random_unit_vector(p, config.seed.wrapping_add(k as u64));
        let (x, trace) = prox::solve(&problem, config, method, &x0).map_err(component)?;
        let collapsed = trace.collapsed_to_zero || x.norm() == 0.0;
        traces.push(trace);
        if collapsed {
            stopped_early = true;
            continue;
        }
        working = deflate(&working, &x).map_err(component)?;
        loadings.set_column(k, &x);
        flags[k] = ColumnFlag::Unit;
    }

    let tag = match method {
        Method::Ista => Reducer::IstaSpca,
        Method::Fista => Reducer::FistaSpca,
    };
    let loadings = LoadingMatrix::new(loadings, flags, tag)?;
    Ok(SpcaReport {
        nonzeros: loadings.nonzeros(),
        loadings,
        traces,
        total_wall_seconds: start.elapsed().as_secs_f64(),
        stopped_early,
    })
}

/// Smallest λ that zeroes the first pass from any unit start, for step `step`.
///
/// One pass is `S_{λ·step}((I + 2·step·DᵀD)x)`; every entry of the
/// argument is bounded by `1 + 2·step·‖D‖_F²` when `‖x‖ = 1`.
pub fn total_shrinkage_lambda(data: &DMatrix<f64>, step: f64) -> f64 {
    (1.0 + 2.0 * step * data.norm_squared()) / step
}

/// Scores `X·V`; zero-flagged columns give all-zero scores.
///
/// Each score is a plain left-to-right dot product, so adding zero columns
/// to `V` leaves the other score columns bit-identical.
pub fn transform(x: &CenteredDataset, v: &LoadingMatrix) -> Result<DataMatrix> {
    if x.ncols() != v.rows() {
        return Err(Error::invalid(format!(
            "data has {} columns, loadings have {} rows",
            x.ncols(),
            v.rows()
        )));
    }
    let data = x.matrix();
    let (n, p) = data.shape();
    let mut scores = DMatrix::zeros(n, v.cols());
    for (j, flag) in v.flags().iter().enumerate() {
        if *flag == ColumnFlag::Zero {
            continue;
        }
        let col = v.matrix().column(j);
        for i in 0..n {
            let mut acc = 0.0;
            for k in 0..p {
                acc += data[(i, k)] * col[k];
            }
            scores[(i, j)] = acc;
        }
    }
    DataMatrix::new(scores)
}
