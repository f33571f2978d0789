//! Reference implementations used only by the integration tests. They share
//! no code with the library's solvers.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn random_matrix(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

pub fn random_vector(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

/// Cyclic Jacobi eigensolver for a symmetric matrix. Returns eigenvalues in
/// descending order with eigenvectors as matching columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-26 * m.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Cyclic coordinate descent for `½‖Ax − b‖² + λ‖x‖₁`.
pub fn lasso_coordinate_descent(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, sweeps: usize) -> DVector<f64> {
    let (n, p) = a.shape();
    let mut x = vec![0.0; p];
    let mut residual: Vec<f64> = b.iter().copied().collect();
    let col_sq: Vec<f64> = (0..p).map(|j| (0..n).map(|i| a[(i, j)] * a[(i, j)]).sum()).collect();
    for _ in 0..sweeps {
        let mut max_change = 0.0f64;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                continue;
            }
            let rho: f64 = (0..n).map(|i| a[(i, j)] * residual[i]).sum::<f64>() + col_sq[j] * x[j];
            let new = if rho > lambda {
                (rho - lambda) / col_sq[j]
            } else if rho < -lambda {
                (rho + lambda) / col_sq[j]
            } else {
                0.0
            };
            let delta = new - x[j];
            if delta != 0.0 {
                for i in 0..n {
                    residual[i] -= a[(i, j)] * delta;
                }
                x[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < 1e-15 {
            break;
        }
    }
    DVector::from_vec(x)
}

/// Largest violation of the LASSO subgradient optimality conditions.
pub fn lasso_kkt_violation(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64, x: &DVector<f64>) -> f64 {
    let grad = a.transpose() * (a * x - b);
    x.iter()
        .zip(grad.iter())
        .map(|(&xi, &gi)| {
            if xi == 0.0 {
                (gi.abs() - lambda).max(0.0)
            } else {
                (gi + lambda * xi.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Per-component soft-thresholding written as three explicit cases.
pub fn scalar_soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}
