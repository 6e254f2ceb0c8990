//! Symmetric eigensolver: cyclic Jacobi rotations.
//!
//! All spectral work in this crate (Gram matrices, covariance inverses) runs
//! through this one solver, so its conventions — descending eigenvalue
//! order, deterministic eigenvector signs — hold everywhere.

use crate::error::{Error, Result};

/// Full eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; `eigenvectors[i]` is the unit
/// eigenvector paired with `eigenvalues[i]`, with its first nonzero
/// component made positive so repeated runs produce identical output.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 100;

/// Diagonalizes a symmetric `n`×`n` matrix given in row-major order.
///
/// Sweeps rotate away each off-diagonal entry in turn until the off-diagonal
/// Frobenius mass drops below `1e-12` times the Frobenius norm of the input.
/// The input must be exactly symmetric (construct it by mirroring) and
/// finite.
pub fn eig_sym(values: &[f64], n: usize) -> Result<EigenDecomposition> {
    if n == 0 || values.len() != n * n {
        return Err(Error::Eigen {
            reason: format!("expected {n}x{n} = {} entries, got {}", n * n, values.len()),
        });
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Eigen {
                reason: format!("non-finite entry {v} at ({}, {})", i / n, i % n),
            });
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if values[i * n + j] != values[j * n + i] {
                return Err(Error::Eigen {
                    reason: format!(
                        "matrix not symmetric at ({i}, {j}): {} vs {}",
                        values[i * n + j],
                        values[j * n + i]
                    ),
                });
            }
        }
    }

    let mut a = values.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let frob = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-12 * frob;

    for _ in 0..MAX_SWEEPS {
        let mut off2 = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off2 += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        if off2.sqrt() <= tol {
            return Ok(extract(&a, &v, n));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, n, p, q);
            }
        }
    }
    Err(Error::Eigen {
        reason: format!("no convergence after {MAX_SWEEPS} sweeps (n = {n})"),
    })
}

/// One Jacobi rotation zeroing a[p][q].
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    // Smaller root of t² + 2tθ - 1 = 0, for the rotation closest to the
    // identity. The wide-θ branch avoids overflow in θ².
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        1.0 / (theta - (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    for i in 0..n {
        if i == p || i == q {
            continue;
        }
        let aip = a[i * n + p];
        let aiq = a[i * n + q];
        let new_p = c * aip - s * aiq;
        let new_q = s * aip + c * aiq;
        a[i * n + p] = new_p;
        a[p * n + i] = new_p;
        a[i * n + q] = new_q;
        a[q * n + i] = new_q;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    for i in 0..n {
        let vip = v[i * n + p];
        let viq = v[i * n + q];
        v[i * n + p] = c * vip - s * viq;
        v[i * n + q] = s * vip + c * viq;
    }
}

fn extract(a: &[f64], v: &[f64], n: usize) -> EigenDecomposition {
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap().then(i.cmp(&j)));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&j| {
            let mut col: Vec<f64> = (0..n).map(|i| v[i * n + j]).collect();
            if let Some(first) = col.iter().find(|x| **x != 0.0) {
                if *first < 0.0 {
                    for x in col.iter_mut() {
                        *x = -*x;
                    }
                }
            }
            col
        })
        .collect();
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}
