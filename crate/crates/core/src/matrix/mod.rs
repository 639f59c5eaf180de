//! Dense symmetric matrices and the small amount of linear algebra the rest
//! of the crate builds on: probability vectors, block partitions, the
//! power-method step, connectivity, symmetric permutation and a cyclic
//! Jacobi eigensolver.

mod dense;
mod eigen;
pub mod io;

pub use dense::{lu_solve, Dense};
pub use eigen::{sym_eigen, sym_eigen_with_vectors, Spectrum, DEFAULT_EIGEN_TOL, MAX_SWEEPS};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Drift from unit mass beyond which [`evolve`] renormalizes its output.
pub const PROB_DRIFT_TOL: f64 = 1e-12;

/// An `n × n` real symmetric matrix in full row-major storage.
///
/// Every mutation writes both `(i, j)` and `(j, i)`, so symmetry is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("matrix order must be at least 1"));
        }
        Ok(Self {
            n,
            data: vec![0.0; n * n],
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        Ok(m)
    }

    /// Builds a matrix from `f(i, j)` evaluated on the upper triangle only.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = Self::zeros(n)?;
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        Ok(m)
    }

    /// Builds a matrix from explicit rows, which must be square and exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut m = Self::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            Error::check_dim(n, row.len())?;
            for (j, &v) in row.iter().enumerate() {
                if j > i && v != rows[j][i] {
                    return Err(Error::domain(format!(
                        "matrix is not symmetric at ({i}, {j}): {v} vs {}",
                        rows[j][i]
                    )));
                }
                m.data[i * n + j] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    /// `eᵀMe`.
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        self.rows()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// Largest deviation of any row sum from 1. Column sums agree by symmetry.
    pub fn stochastic_residual(&self) -> f64 {
        self.row_sums()
            .into_iter()
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Self) -> Result<Self> {
        Error::check_dim(self.n, other.n)?;
        Ok(Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// `M v` (equivalently `vᵀM`, by symmetry).
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.n, v.len())?;
        Ok(self
            .rows()
            .map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Values strictly above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect()
    }

    pub fn to_dense(&self) -> Dense {
        Dense::from_vec(self.n, self.n, self.data.clone())
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn principal(&self, idx: &[usize]) -> Result<Self> {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Rectangular block with rows `rows` and columns `cols`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Dense {
        let mut out = Dense::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// A nonnegative vector with unit mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Normalizes `entries` to unit sum. Rejects negative, non-finite or all-zero input.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("probability vector must be nonempty"));
        }
        if let Some((i, v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::domain(format!(
                "probability vector entry {i} is {v}"
            )));
        }
        let sum: f64 = entries.iter().sum();
        if sum <= 0.0 {
            return Err(Error::domain("probability vector has zero mass"));
        }
        Ok(Self(entries.into_iter().map(|v| v / sum).collect()))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn indicator(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::domain(format!("index {i} out of range for n={n}")));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance to the uniform vector.
    pub fn distance_to_uniform(&self) -> f64 {
        let u = 1.0 / self.0.len() as f64;
        self.0.iter().map(|v| (v - u).powi(2)).sum::<f64>().sqrt()
    }
}

/// One power-method step `xᵀP`.
///
/// `p` is expected to be doubly stochastic; the result is renormalized if
/// floating-point drift moves its mass more than [`PROB_DRIFT_TOL`] from 1.
pub fn evolve(x: &ProbVector, p: &SymMatrix) -> Result<ProbVector> {
    let mut next = p.mul_vec(x.as_slice())?;
    for v in &mut next {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = next.iter().sum();
    if (sum - 1.0).abs() > PROB_DRIFT_TOL {
        if sum <= 0.0 {
            return Err(Error::domain("evolution lost all probability mass"));
        }
        next.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(ProbVector(next))
}

/// Connectivity of the graph with an edge wherever `M[i][j] > 0`.
pub fn is_irreducible(m: &SymMatrix) -> Result<bool> {
    if !m.is_nonnegative() {
        return Err(Error::domain("irreducibility test requires a nonnegative matrix"));
    }
    Ok(connected_components(m).len() == 1)
}

/// Connected components of the positive pattern, each sorted, ordered by smallest member.
pub fn connected_components(m: &SymMatrix) -> Vec<Vec<usize>> {
    let n = m.n();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v > 0.0 && !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                    queue.push_back(j);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    Error::check_dim(n, perm.len())?;
    let mut hit = vec![false; n];
    for &p in perm {
        if p >= n || hit[p] {
            return Err(Error::domain(format!("{perm:?} is not a permutation of 0..{n}")));
        }
        hit[p] = true;
    }
    Ok(())
}

/// Symmetric permutation: `out[i][j] = M[perm[i]][perm[j]]`.
pub fn permute_sym(m: &SymMatrix, perm: &[usize]) -> Result<SymMatrix> {
    validate_permutation(perm, m.n())?;
    SymMatrix::from_fn(m.n(), |i, j| m.get(perm[i], perm[j]))
}

pub fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    validate_permutation(perm, perm.len())?;
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    Ok(inv)
}

/// Assignment of indices `0..n` to blocks `0..k`, every block nonempty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl BlockPartition {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::domain("partition must cover at least one index"));
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut sizes = vec![0; k];
        for &b in &assignment {
            sizes[b] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::domain(format!("block {empty} is empty")));
        }
        Ok(Self { assignment, sizes })
    }

    /// Builds a partition from explicit index sets that must cover `0..n` exactly once.
    pub fn from_blocks(n: usize, blocks: &[Vec<usize>]) -> Result<Self> {
        let mut assignment = vec![usize::MAX; n];
        for (b, members) in blocks.iter().enumerate() {
            for &i in members {
                if i >= n || assignment[i] != usize::MAX {
                    return Err(Error::domain(format!("index {i} invalid or assigned twice")));
                }
                assignment[i] = b;
            }
        }
        if let Some(i) = assignment.iter().position(|&b| b == usize::MAX) {
            return Err(Error::domain(format!("index {i} is not assigned to a block")));
        }
        Self::new(assignment)
    }

    /// Two-block split with `first` as block 0 and everything else as block 1.
    pub fn split(n: usize, first: &[usize]) -> Result<Self> {
        let mut assignment = vec![1; n];
        for &i in first {
            if i >= n {
                return Err(Error::domain(format!("index {i} out of range for n={n}")));
            }
            assignment[i] = 0;
        }
        Self::new(assignment)
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Sorted members of block `b`.
    pub fn members(&self, b: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == b).collect()
    }

    /// Sorted indices outside block `b`.
    pub fn complement(&self, b: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] != b).collect()
    }

    /// Permutation listing block 0's members, then block 1's, and so on.
    pub fn block_order(&self) -> Vec<usize> {
        (0..self.num_blocks()).flat_map(|b| self.members(b)).collect()
    }
}
