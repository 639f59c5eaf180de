use serde::{Deserialize, Serialize};

use super::{Dense, SymMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order, with eigenvectors as matching columns when requested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Dense>,
    pub sweeps: usize,
}

impl Spectrum {
    pub fn from_values(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Self {
            eigenvalues,
            eigenvectors: None,
            sweeps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvector for the `i`-th largest eigenvalue.
    pub fn vector(&self, i: usize) -> Option<Vec<f64>> {
        self.eigenvectors.as_ref().map(|v| v.column(i))
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn sym_eigen(m: &SymMatrix, tol: f64) -> Result<Spectrum> {
    jacobi(m, tol, MAX_SWEEPS, false)
}

/// Eigenvalues and orthonormal eigenvectors by cyclic Jacobi rotations.
pub fn sym_eigen_with_vectors(m: &SymMatrix, tol: f64) -> Result<Spectrum> {
    jacobi(m, tol, MAX_SWEEPS, true)
}

fn off_norm(a: &Dense) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += a.get(i, j).powi(2);
        }
    }
    (2.0 * s).sqrt()
}

fn jacobi(m: &SymMatrix, tol: f64, max_sweeps: usize, vectors: bool) -> Result<Spectrum> {
    if !(tol > 0.0) {
        return Err(Error::domain("eigensolver tolerance must be positive"));
    }
    let n = m.n();
    let mut a = m.to_dense();
    let mut v = vectors.then(|| Dense::identity(n));
    let threshold = tol * m.frobenius_norm();

    let mut sweeps = 0;
    loop {
        let off = off_norm(&a);
        if off <= threshold {
            break;
        }
        if sweeps == max_sweeps {
            return Err(Error::IterationLimit {
                sweeps,
                off_norm: off,
                best_eigenvalues: (0..n).map(|i| a.get(i, i)).collect(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                rotate(&mut a, p, q, c, s);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);
                if let Some(v) = v.as_mut() {
                    rotate_columns(v, p, q, c, s);
                }
            }
        }
    }

    let raw: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal eigenvalues keep their Jacobi order
    order.sort_by(|&i, &j| raw[j].total_cmp(&raw[i]));
    let eigenvalues = order.iter().map(|&i| raw[i]).collect();
    let eigenvectors = v.map(|v| Dense::from_fn(n, n, |r, c| v.get(r, order[c])));
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

/// `A ← JᵀAJ` for the plane rotation in `(p, q)`.
fn rotate(a: &mut Dense, p: usize, q: usize, c: f64, s: f64) {
    rotate_columns(a, p, q, c, s);
    let n = a.cols();
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, c * apk - s * aqk);
        a.set(q, k, s * apk + c * aqk);
    }
}

fn rotate_columns(a: &mut Dense, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..a.rows() {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, c * akp - s * akq);
        a.set(k, q, s * akp + c * akq);
    }
}
