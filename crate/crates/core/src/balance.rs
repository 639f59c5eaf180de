//! Symmetric Sinkhorn-Knopp balancing `P = DSD`.
//!
//! A nonnegative symmetric matrix that is irreducible with a positive main
//! diagonal is fully indecomposable, so a unique positive diagonal `D` with
//! `DSD` doubly stochastic exists. Inputs failing that test are rejected with
//! the diagnosis rather than perturbed.

use serde::{Deserialize, Serialize};

use crate::consensus::{ConsensusKind, ConsensusMatrix};
use crate::error::{Error, Result};
use crate::matrix::{is_irreducible, SymMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportDiagnosis {
    pub irreducible: bool,
    pub positive_diagonal: bool,
    /// Irreducible with a positive diagonal; guarantees balancing succeeds.
    pub fully_indecomposable: bool,
    /// Rows with no positive off-diagonal entry.
    pub isolated: Vec<usize>,
}

/// Zero-pattern preconditions for balancing.
pub fn check_support(s: &SymMatrix) -> Result<SupportDiagnosis> {
    let irreducible = is_irreducible(s)?;
    let positive_diagonal = s.diagonal().iter().all(|&v| v > 0.0);
    let n = s.n();
    let isolated = (0..n)
        .filter(|&i| n > 1 && (0..n).all(|j| j == i || s.get(i, j) == 0.0))
        .collect();
    Ok(SupportDiagnosis {
        irreducible,
        positive_diagonal,
        fully_indecomposable: irreducible && positive_diagonal,
        isolated,
    })
}

/// A doubly stochastic symmetric matrix with its scaling diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancedMatrix {
    pub p: SymMatrix,
    pub d: Vec<f64>,
    pub iterations: usize,
    /// Max deviation of any row (= column) sum from 1.
    pub residual: f64,
}

impl BalancedMatrix {
    pub fn n(&self) -> usize {
        self.p.n()
    }

    /// Wraps a matrix the caller knows to be doubly stochastic (`d` = ones).
    pub fn from_doubly_stochastic(p: SymMatrix, tol: f64) -> Result<Self> {
        if !p.is_nonnegative() {
            return Err(Error::domain("doubly stochastic matrix must be nonnegative"));
        }
        let residual = p.stochastic_residual();
        if residual > tol {
            return Err(Error::domain(format!(
                "row sums deviate from 1 by {residual:.3e} (> {tol:.1e})"
            )));
        }
        let n = p.n();
        Ok(Self {
            p,
            d: vec![1.0; n],
            iterations: 0,
            residual,
        })
    }
}

pub fn sinkhorn_knopp_default(s: &ConsensusMatrix) -> Result<BalancedMatrix> {
    sinkhorn_knopp(s, DEFAULT_TOL, DEFAULT_MAX_ITER)
}

pub fn sinkhorn_knopp(s: &ConsensusMatrix, tol: f64, max_iter: usize) -> Result<BalancedMatrix> {
    balance_matrix(&s.s, tol, max_iter)
}

/// `max_i d_i ≤ 1/√r` slack for an ensemble sum, whose diagonal is `r`
/// (`p_ii = d_i² r ≤ 1`). `None` for other consensus kinds.
pub fn scaling_bound_slack(s: &ConsensusMatrix, b: &BalancedMatrix) -> Option<f64> {
    (s.kind == ConsensusKind::EnsembleSum && s.r > 0).then(|| {
        let bound = 1.0 / (s.r as f64).sqrt();
        bound - b.d.iter().copied().fold(0.0, f64::max)
    })
}

/// Balances any nonnegative symmetric matrix with total support.
pub fn balance_matrix(s: &SymMatrix, tol: f64, max_iter: usize) -> Result<BalancedMatrix> {
    let total = s.total();
    let start = if total > 0.0 {
        (s.n() as f64 / total).sqrt()
    } else {
        1.0
    };
    balance_from(s, vec![start; s.n()], tol, max_iter)
}

/// Symmetric iteration `d ← d / √(d ∘ Sd)` from an explicit positive start.
pub fn balance_from(s: &SymMatrix, mut d: Vec<f64>, tol: f64, max_iter: usize) -> Result<BalancedMatrix> {
    if !(tol > 0.0) {
        return Err(Error::domain("balancing tolerance must be positive"));
    }
    Error::check_dim(s.n(), d.len())?;
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::domain("initial scaling must be positive"));
    }
    let diag = check_support(s)?;
    if !diag.fully_indecomposable {
        return Err(Error::Support(diag));
    }

    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let sd = s.mul_vec(&d)?;
        let sums: Vec<f64> = d.iter().zip(&sd).map(|(a, b)| a * b).collect();
        let residual = sums.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        history.push(residual);
        if residual <= tol {
            break;
        }
        if iterations == max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual,
                residual_history: history,
            });
        }
        for (di, ri) in d.iter_mut().zip(&sums) {
            *di /= ri.sqrt();
        }
        iterations += 1;
    }

    let p = SymMatrix::from_fn(s.n(), |i, j| d[i] * d[j] * s.get(i, j))?;
    let residual = p.stochastic_residual();
    Ok(BalancedMatrix {
        p,
        d,
        iterations,
        residual,
    })
}
