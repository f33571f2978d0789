//! Nearest-neighbor and kernel ridge regression classifiers.
//!
//! Distances and kernel entries are accumulated left to right over the
//! feature columns, so appending all-zero feature columns to both sets leaves
//! every value (and so every prediction) bit-identical.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::datamat::{DataMatrix, LabelVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn rbf(sigma: f64) -> Result<Self> {
        let spec = KernelSpec::Rbf { sigma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Rbf { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(Error::invalid(format!("rbf bandwidth must be finite and > 0, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    fn eval(&self, a: &DataMatrix, i: usize, b: &DataMatrix, j: usize) -> f64 {
        let (a, b) = (a.as_matrix(), b.as_matrix());
        let p = a.ncols();
        match *self {
            KernelSpec::Linear => {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += a[(i, k)] * b[(j, k)];
                }
                acc
            }
            KernelSpec::Rbf { sigma } => {
                let mut acc = 0.0;
                for k in 0..p {
                    let diff = a[(i, k)] - b[(j, k)];
                    acc += diff * diff;
                }
                (-acc / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Linear => f.write_str("linear"),
            KernelSpec::Rbf { sigma } => write!(f, "rbf(sigma={sigma})"),
        }
    }
}

/// Kind of kernel named on the command line; `rbf` needs a separate bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    Rbf,
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            other => Err(Error::invalid(format!("unknown kernel {other:?}"))),
        }
    }
}

fn check_cols(a: &DataMatrix, b: &DataMatrix) -> Result<()> {
    if a.ncols() == b.ncols() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "feature dimension mismatch: {} vs {}",
            a.ncols(),
            b.ncols()
        )))
    }
}

/// n×m matrix of kernel values between the rows of `a` and `b`.
pub fn kernel_matrix(a: &DataMatrix, b: &DataMatrix, spec: &KernelSpec) -> Result<DMatrix<f64>> {
    check_cols(a, b)?;
    spec.validate()?;
    let (n, m) = (a.nrows(), b.nrows());
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..m).map(|j| spec.eval(a, i, b, j)).collect())
        .collect();
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

/// Fitted kernel ridge regression with one-hot targets.
#[derive(Debug, Clone, PartialEq)]
pub struct KrrModel {
    /// n×C dual coefficients.
    pub alpha: DMatrix<f64>,
    pub train_features: DataMatrix,
    pub spec: KernelSpec,
    pub gamma: f64,
}

impl KrrModel {
    pub fn classes(&self) -> usize {
        self.alpha.ncols()
    }
}

/// Solves `(K + γI) α = Y` for the one-hot label matrix `Y`.
pub fn krr_fit(train: &DataMatrix, labels: &LabelVector, spec: &KernelSpec, gamma: f64) -> Result<KrrModel> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("ridge weight gamma must be finite and > 0, got {gamma}")));
    }
    if labels.len() != train.nrows() {
        return Err(Error::invalid(format!(
            "{} labels for {} training rows",
            labels.len(),
            train.nrows()
        )));
    }
    let n = train.nrows();
    let classes = labels.classes();
    let mut targets = DMatrix::zeros(n, classes);
    for (i, &l) in labels.as_slice().iter().enumerate() {
        targets[(i, l)] = 1.0;
    }

    let mut system = kernel_matrix(train, train, spec)?;
    for i in 0..n {
        system[(i, i)] += gamma;
    }
    let alpha = solve_spd(&system, &targets)?;
    Ok(KrrModel {
        alpha,
        train_features: train.clone(),
        spec: *spec,
        gamma,
    })
}

/// Cholesky solve with two rounds of iterative refinement and a residual check.
fn solve_spd(system: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let solve = |b: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        if let Some(chol) = system.clone().cholesky() {
            return Ok(chol.solve(b));
        }
        system
            .clone()
            .lu()
            .solve(b)
            .ok_or_else(|| Error::Numeric("kernel system is singular".into()))
    };
    let mut x = solve(rhs)?;
    let target = 1e-8 * rhs.norm();
    for _ in 0..2 {
        let residual = rhs - system * &x;
        if residual.norm() <= target {
            break;
        }
        x += solve(&residual)?;
    }
    let residual = (system * &x - rhs).norm();
    if !(residual <= target) {
        return Err(Error::Numeric(format!(
            "kernel ridge solve residual {residual:e} exceeds {target:e}"
        )));
    }
    Ok(x)
}

/// Argmax of `K(test, train) · α`, ties toward the smaller class id.
pub fn krr_predict(model: &KrrModel, test: &DataMatrix) -> Result<LabelVector> {
    check_cols(&model.train_features, test)?;
    let k = kernel_matrix(test, &model.train_features, &model.spec)?;
    let scores = k * &model.alpha;
    let labels = (0..scores.nrows())
        .map(|i| {
            let mut best = 0;
            for c in 1..scores.ncols() {
                if scores[(i, c)] > scores[(i, best)] {
                    best = c;
                }
            }
            best
        })
        .collect();
    LabelVector::new(labels, model.classes())
}

/// k-nearest-neighbor vote under the Euclidean metric.
///
/// Distance ties go to the lower training index. With `k > 1` the majority
/// class wins; among tied classes, the one with the nearest member wins.
pub fn nn_classify(train: &DataMatrix, labels: &LabelVector, test: &DataMatrix, k: usize) -> Result<LabelVector> {
    check_cols(train, test)?;
    let n = train.nrows();
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {} training rows", labels.len(), n)));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k must be in 1..={n}, got {k}")));
    }
    let (tr, te) = (train.as_matrix(), test.as_matrix());
    let p = tr.ncols();
    let classes = labels.classes();
    let predictions: Vec<usize> = (0..te.nrows())
        .into_par_iter()
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .map(|j| {
                    let mut acc = 0.0;
                    for c in 0..p {
                        let diff = te[(i, c)] - tr[(j, c)];
                        acc += diff * diff;
                    }
                    (acc, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let neighbors = &dist[..k];
            let mut votes = vec![0usize; classes];
            for &(_, j) in neighbors {
                votes[labels.as_slice()[j]] += 1;
            }
            let top = *votes.iter().max().unwrap_or(&0);
            // neighbors are sorted by distance, so the first tied class seen is nearest
            neighbors
                .iter()
                .map(|&(_, j)| labels.as_slice()[j])
                .find(|&c| votes[c] == top)
                .unwrap_or(0)
        })
        .collect();
    LabelVector::new(predictions, classes)
}
