//! Near-uncoupledness: stochastic complements, the two-block uncoupling
//! measure σ, Perron cluster detection and numeric checks of the bounds
//! relating σ of `S`, σ of `P = DSD` and `λ₂(P)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::balance::BalancedMatrix;
use crate::consensus::ConsensusMatrix;
use crate::error::{Error, Result};
use crate::matrix::{lu_solve, permute_sym, sym_eigen, sym_eigen_with_vectors, BlockPartition, Dense, Spectrum, SymMatrix, DEFAULT_EIGEN_TOL};

/// Enumerate subsets exactly while `C(n, n1)` stays at or below this.
pub const DEFAULT_EXACT_LIMIT: u64 = 1_000_000;
/// Gaps within this of the largest gap count as ties.
pub const PERRON_TIE_TOL: f64 = 1e-12;
/// Slack allowed on both bound checks.
pub const BOUND_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticComplement {
    pub c: SymMatrix,
    pub block: usize,
    /// Indices of `block` in `P`, in the order used for the rows of `c`.
    pub members: Vec<usize>,
}

/// `C₁₁ = P₁₁ + P₁₂ (I − P₂₂)⁻¹ P₂₁` for an explicit 2×2 block split.
///
/// With `P₁₂ = 0` the correction term vanishes and no solve is attempted,
/// so blocks that are already uncoupled come back unchanged.
fn complement_from_blocks(p11: &Dense, p12: &Dense, p21: &Dense, p22: &Dense) -> Result<SymMatrix> {
    if p12.as_slice().iter().all(|&v| v == 0.0) {
        return SymMatrix::from_fn(p11.rows(), |a, b| p11.get(a, b));
    }
    let m = p22.rows();
    let i_minus = Dense::from_fn(m, m, |a, b| (a == b) as u8 as f64 - p22.get(a, b));
    let x = lu_solve(&i_minus, p21)?;
    let tail = p12.matmul(&x)?;
    // symmetric in exact arithmetic; average away rounding asymmetry
    SymMatrix::from_fn(p11.rows(), |a, b| {
        p11.get(a, b) + 0.5 * (tail.get(a, b) + tail.get(b, a))
    })
}

/// Stochastic complement of diagonal block `block` of `p` under `part`.
pub fn stochastic_complement(p: &SymMatrix, part: &BlockPartition, block: usize) -> Result<StochasticComplement> {
    Error::check_dim(p.n(), part.n())?;
    if block >= part.num_blocks() {
        return Err(Error::domain(format!("block {block} does not exist")));
    }
    let members = part.members(block);
    let rest = part.complement(block);
    if rest.is_empty() {
        return Err(Error::domain("stochastic complement needs a proper block"));
    }
    let c = complement_from_blocks(
        &p.block(&members, &members),
        &p.block(&members, &rest),
        &p.block(&rest, &members),
        &p.block(&rest, &rest),
    )?;
    Ok(StochasticComplement { c, block, members })
}

/// The same complement computed by symmetrically permuting `p` into block
/// order, interchanging block 0 with `block`, and reading the leading 2×2
/// repartition.
pub fn stochastic_complement_repartitioned(
    p: &SymMatrix,
    part: &BlockPartition,
    block: usize,
) -> Result<StochasticComplement> {
    Error::check_dim(p.n(), part.n())?;
    let k = part.num_blocks();
    if block >= k || k < 2 {
        return Err(Error::domain(format!("block {block} is not a proper block")));
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.swap(0, block);
    let perm: Vec<usize> = order.iter().flat_map(|&b| part.members(b)).collect();
    let q = permute_sym(p, &perm)?;
    let ni = part.sizes()[block];
    let head: Vec<usize> = (0..ni).collect();
    let tail: Vec<usize> = (ni..p.n()).collect();
    let c = complement_from_blocks(
        &q.block(&head, &head),
        &q.block(&head, &tail),
        &q.block(&tail, &head),
        &q.block(&tail, &tail),
    )?;
    Ok(StochasticComplement {
        c,
        block,
        members: perm[..ni].to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncouplingReport {
    pub n1: usize,
    pub sigma: f64,
    /// Block 0 holds the `n1` chosen indices.
    pub minimizing_partition: BlockPartition,
    /// True when every size-`n1` subset was enumerated.
    pub exact: bool,
}

impl UncouplingReport {
    pub fn first_block(&self) -> Vec<usize> {
        self.minimizing_partition.members(0)
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u64) {
            Some(v) => v / (i as u64 + 1),
            None => return u64::MAX,
        };
    }
    acc
}

/// `2 eᵀS₁₂e`: twice the similarity crossing between `first` and the rest.
pub fn cross_mass(s: &SymMatrix, in_first: &[bool]) -> f64 {
    let n = s.n();
    let mut acc = 0.0;
    for i in 0..n {
        if !in_first[i] {
            continue;
        }
        for j in 0..n {
            if !in_first[j] {
                acc += s.get(i, j);
            }
        }
    }
    2.0 * acc
}

/// σ(S, n1): the smallest fraction of total mass in the off-diagonal blocks
/// over all splits into `n1` and `n − n1` indices.
pub fn uncoupling_measure(s: &SymMatrix, n1: usize, exact_limit: u64) -> Result<UncouplingReport> {
    let n = s.n();
    if n1 == 0 || n1 >= n {
        return Err(Error::domain(format!("n1 must satisfy 1 <= n1 < n={n}, got {n1}")));
    }
    if !s.is_nonnegative() {
        return Err(Error::domain("uncoupling measure requires a nonnegative matrix"));
    }
    let total = s.total();
    if total <= 0.0 {
        return Err(Error::domain("uncoupling measure requires a nonzero matrix"));
    }
    let (first, mass, exact) = if binomial(n, n1) <= exact_limit {
        let (f, m) = enumerate_min(s, n1);
        (f, m, true)
    } else {
        let (f, m) = spectral_swap(s, n1)?;
        (f, m, false)
    };
    Ok(UncouplingReport {
        n1,
        sigma: mass / total,
        minimizing_partition: BlockPartition::split(n, &first)?,
        exact,
    })
}

/// Lexicographic enumeration; the first subset reaching the minimum wins.
fn enumerate_min(s: &SymMatrix, n1: usize) -> (Vec<usize>, f64) {
    let n = s.n();
    let rows = s.row_sums();
    let mut idx: Vec<usize> = (0..n1).collect();
    let mut best = (idx.clone(), f64::INFINITY);
    loop {
        // cross = Σ_{i∈A} rowsum_i − Σ_{i,j∈A} s_ij
        let mut inner = 0.0;
        let mut outer = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            outer += rows[i];
            inner += s.get(i, i);
            for &j in &idx[a + 1..] {
                inner += 2.0 * s.get(i, j);
            }
        }
        let mass = 2.0 * (outer - inner).max(0.0);
        if mass < best.1 {
            best = (idx.clone(), mass);
        }
        // next combination
        let mut pos = n1;
        while pos > 0 && idx[pos - 1] == n - n1 + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for q in pos..n1 {
            idx[q] = idx[q - 1] + 1;
        }
    }
    // recompute exactly for the winner to avoid cancellation in the running formula
    let mut in_first = vec![false; n];
    best.0.iter().for_each(|&i| in_first[i] = true);
    let mass = cross_mass(s, &in_first);
    (best.0, mass)
}

/// Seeds the split from the second eigenvector of `D^{-1/2} S D^{-1/2}`,
/// then applies best-improvement swaps until none lowers the crossing mass.
fn spectral_swap(s: &SymMatrix, n1: usize) -> Result<(Vec<usize>, f64)> {
    let n = s.n();
    let rows = s.row_sums();
    let inv_sqrt: Vec<f64> = rows.iter().map(|&r| if r > 0.0 { 1.0 / r.sqrt() } else { 1.0 }).collect();
    let norm = SymMatrix::from_fn(n, |i, j| s.get(i, j) * inv_sqrt[i] * inv_sqrt[j])?;
    let spec = sym_eigen_with_vectors(&norm, DEFAULT_EIGEN_TOL)?;
    let v = spec.vector(1).unwrap_or_else(|| vec![0.0; n]);
    let dir: Vec<f64> = v.iter().zip(&inv_sqrt).map(|(a, b)| a * b).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| dir[j].total_cmp(&dir[i]).then(i.cmp(&j)));
    let candidates = [order[..n1].to_vec(), order[n - n1..].to_vec()];
    let mut best: Option<(Vec<usize>, f64)> = None;
    for seed in candidates {
        let (set, mass) = hill_climb(s, &rows, seed);
        if best.as_ref().map_or(true, |b| mass < b.1) {
            best = Some((set, mass));
        }
    }
    Ok(best.expect("two candidates"))
}

fn hill_climb(s: &SymMatrix, rows: &[f64], seed: Vec<usize>) -> (Vec<usize>, f64) {
    let n = s.n();
    let mut in_first = vec![false; n];
    seed.iter().for_each(|&i| in_first[i] = true);
    // a[i] = Σ_{k ∈ A} s_ik
    let mut a: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&k| in_first[k]).map(|k| s.get(i, k)).sum())
        .collect();
    let mut mass = cross_mass(s, &in_first);
    loop {
        let mut best = (0.0, usize::MAX, usize::MAX);
        for i in (0..n).filter(|&i| in_first[i]) {
            let out_i = a[i] - s.get(i, i) - (rows[i] - a[i]);
            for j in (0..n).filter(|&j| !in_first[j]) {
                let in_j = (rows[j] - a[j]) - a[j] - s.get(j, j);
                let delta = 2.0 * (out_i + in_j + 2.0 * s.get(i, j));
                if delta < best.0 - 1e-12 * mass.max(1.0) {
                    best = (delta, i, j);
                }
            }
        }
        if best.1 == usize::MAX {
            break;
        }
        let (_, i, j) = best;
        in_first[i] = false;
        in_first[j] = true;
        for k in 0..n {
            a[k] += s.get(k, j) - s.get(k, i);
        }
        mass = cross_mass(s, &in_first);
    }
    ((0..n).filter(|&i| in_first[i]).collect(), mass)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaBoundReport {
    pub n: usize,
    pub n1: usize,
    pub r: usize,
    /// `Σ = eᵀSe`.
    pub total: f64,
    pub sigma_s: f64,
    pub sigma_p: f64,
    /// `Σ/(n r) · σ(S, n1)`.
    pub bound: f64,
    pub pass: bool,
}

/// Checks `σ(P, n1) ≤ Σ/(n r) · σ(S, n1)` with both measures enumerated exactly.
pub fn sigma_bound_check(s: &ConsensusMatrix, b: &BalancedMatrix, n1: usize, exact_limit: u64) -> Result<SigmaBoundReport> {
    Error::check_dim(s.n(), b.n())?;
    let us = uncoupling_measure(&s.s, n1, exact_limit)?;
    let up = uncoupling_measure(&b.p, n1, exact_limit)?;
    if !(us.exact && up.exact) {
        return Err(Error::domain(format!(
            "sigma bound check needs exact enumeration; C({}, {n1}) exceeds the limit",
            s.n()
        )));
    }
    let n = s.n();
    let total = s.s.total();
    let bound = total / (n as f64 * s.r as f64) * us.sigma;
    Ok(SigmaBoundReport {
        n,
        n1,
        r: s.r,
        total,
        sigma_s: us.sigma,
        sigma_p: up.sigma,
        bound,
        pass: up.sigma <= bound + BOUND_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambda2BoundReport {
    pub n: usize,
    pub n1: usize,
    pub lambda2: f64,
    /// `|1 − λ₂|`.
    pub gap: f64,
    pub sigma_p: f64,
    /// `2√n · σ(P, n1)`.
    pub bound: f64,
    pub exact: bool,
    pub pass: bool,
}

/// Checks the 2-norm bound `|1 − λ₂(P)| ≤ 2√n σ(P, n1)`.
pub fn lambda2_bound_check(b: &BalancedMatrix, n1: usize, exact_limit: u64) -> Result<Lambda2BoundReport> {
    let n = b.n();
    if n < 2 {
        return Err(Error::domain("lambda2 needs n >= 2"));
    }
    let spec = sym_eigen(&b.p, DEFAULT_EIGEN_TOL)?;
    let up = uncoupling_measure(&b.p, n1, exact_limit)?;
    let lambda2 = spec.eigenvalues[1];
    let gap = (1.0 - lambda2).abs();
    let bound = 2.0 * (n as f64).sqrt() * up.sigma;
    Ok(Lambda2BoundReport {
        n,
        n1,
        lambda2,
        gap,
        sigma_p: up.sigma,
        bound,
        exact: up.exact,
        pass: gap <= bound + BOUND_SLACK,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerronCluster {
    pub k: usize,
    /// `λ_k − λ_{k+1}`.
    pub gap: f64,
    pub eigenvalues: Vec<f64>,
    pub warning: Option<String>,
}

/// Size of the leading group of eigenvalues ending at the largest
/// consecutive gap; ties resolve to the smallest `k`.
pub fn perron_cluster(spec: &Spectrum) -> Result<PerronCluster> {
    let ev = &spec.eigenvalues;
    if ev.len() < 2 {
        return Err(Error::domain("Perron cluster needs at least two eigenvalues"));
    }
    if ev.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::domain("spectrum must be sorted in descending order"));
    }
    let gaps: Vec<f64> = ev.windows(2).map(|w| w[0] - w[1]).collect();
    let max = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let k = gaps.iter().position(|&g| g >= max - PERRON_TIE_TOL).unwrap() + 1;
    let n = ev.len();
    let warning = (k == n - 1 && n > 2)
        .then(|| format!("largest gap is at the end of the spectrum; using k={k}"));
    Ok(PerronCluster {
        k,
        gap: gaps[k - 1],
        eigenvalues: ev[..k].to_vec(),
        warning,
    })
}

macro_rules! kv_display {
    ($t:ty { $($f:ident),* }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let fields: Vec<String> = vec![$(format!("{}={}", stringify!($f), self.$f)),*];
                f.write_str(&fields.join(" "))
            }
        }
    };
}

kv_display!(SigmaBoundReport { n, n1, r, total, sigma_s, sigma_p, bound, pass });
kv_display!(Lambda2BoundReport { n, n1, lambda2, gap, sigma_p, bound, exact, pass });

impl fmt::Display for UncouplingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first: Vec<String> = self.first_block().iter().map(|i| (i + 1).to_string()).collect();
        write!(f, "n1={} sigma={} exact={} first_block={}", self.n1, self.sigma, self.exact, first.join(","))
    }
}
