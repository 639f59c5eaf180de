//! Independent reference computations used by unit and integration tests.
//! Each one takes the slow or textbook route on purpose.
#![allow(dead_code)]

use rand::Rng;
use sca_core::matrix::{Dense, SymMatrix};

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    SymMatrix::from_fn(n, |_, _| rng.gen_range(lo..hi)).unwrap()
}

/// Entries uniform on `[lo, hi)`; a zero `lo` still gives positive entries
/// almost surely.
pub fn random_positive_symmetric<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> SymMatrix {
    assert!(lo >= 0.0 && hi > lo);
    SymMatrix::from_fn(n, |_, _| {
        let v: f64 = rng.gen_range(lo..hi);
        if v > 0.0 { v } else { hi * 1e-3 }
    })
    .unwrap()
}

/// Closed-form eigenvalues of a real symmetric 3×3 matrix, descending.
pub fn cubic_sym_eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let a = |i, j| m.get(i, j);
    let p1 = a(0, 1).powi(2) + a(0, 2).powi(2) + a(1, 2).powi(2);
    let q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    if p1 == 0.0 {
        let mut d = vec![a(0, 0), a(1, 1), a(2, 2)];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let p2 = (a(0, 0) - q).powi(2) + (a(1, 1) - q).powi(2) + (a(2, 2) - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = |i, j| (a(i, j) - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    vec![e1, e2, e3]
}

/// Classical Sinkhorn: alternately normalise rows and columns.
pub fn alternating_normalization(a: &Dense, iters: usize) -> Dense {
    let n = a.rows();
    let mut m = a.clone();
    for _ in 0..iters {
        for i in 0..n {
            let s: f64 = m.row(i).iter().sum();
            for j in 0..n {
                m.set(i, j, m.get(i, j) / s);
            }
        }
        for j in 0..n {
            let s: f64 = (0..n).map(|i| m.get(i, j)).sum();
            for i in 0..n {
                m.set(i, j, m.get(i, j) / s);
            }
        }
    }
    m
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Minimum mismatches over every relabelling of `a` into `b`'s labels.
pub fn brute_force_errors(a: &[usize], b: &[usize]) -> usize {
    let la = a.iter().max().map_or(0, |m| m + 1);
    let lb = b.iter().max().map_or(0, |m| m + 1);
    let l = la.max(lb);
    permutations(l)
        .iter()
        .map(|perm| a.iter().zip(b).filter(|(x, y)| perm[**x] != **y).count())
        .min()
        .unwrap()
}

/// Row of the largest entry in each column, first row on ties.
pub fn argmax_labels(h: &Dense) -> Vec<usize> {
    (0..h.cols())
        .map(|j| {
            let mut best = 0;
            for i in 1..h.rows() {
                if h.get(i, j) > h.get(best, j) {
                    best = i;
                }
            }
            best
        })
        .collect()
}

pub fn pairwise_adjacency(labels: &[usize]) -> SymMatrix {
    let n = labels.len();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                rows[i][j] = 1.0;
            }
        }
    }
    SymMatrix::from_rows(&rows).unwrap()
}

/// Tries every set of `k − 1` cut positions in the descending sort of `x`
/// and keeps the one with the largest total gap (first in lexicographic
/// order on ties). Labels count segments from the top.
pub fn exhaustive_gap_cut(x: &[f64], k: usize) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
    let gaps: Vec<f64> = order.windows(2).map(|w| x[w[0]] - x[w[1]]).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cuts: Vec<usize> = (0..k - 1).collect();
    loop {
        let total: f64 = cuts.iter().map(|&c| gaps[c]).sum();
        if best.as_ref().map_or(true, |b| total > b.0) {
            best = Some((total, cuts.clone()));
        }
        let m = k - 1;
        let mut pos = m;
        while pos > 0 && cuts[pos - 1] == gaps.len() - m + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        cuts[pos - 1] += 1;
        for q in pos..m {
            cuts[q] = cuts[q - 1] + 1;
        }
    }
    let cuts = best.unwrap().1;
    let mut labels = vec![0; n];
    let mut seg = 0;
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = seg;
        if cuts.contains(&rank) {
            seg += 1;
        }
    }
    labels
}

/// σ by scanning every bitmask of popcount `n1`; returns the value and the
/// lowest-numbered minimizing mask.
pub fn sigma_by_bitmask(s: &SymMatrix, n1: usize) -> (f64, u32) {
    let n = s.n();
    assert!(n < 32);
    let total = s.total();
    let mut best = (f64::INFINITY, 0);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let mut cross = 0.0;
        for i in 0..n {
            for j in 0..n {
                if (mask >> i) & 1 == 1 && (mask >> j) & 1 == 0 {
                    cross += s.get(i, j);
                }
            }
        }
        let sigma = 2.0 * cross / total;
        if sigma < best.0 {
            best = (sigma, mask);
        }
    }
    best
}

/// Doubly stochastic matrix with `sizes` blocks: uniform within blocks,
/// `eps / n` on every off-block entry, then rebalanced so rows sum to 1.
pub fn planted_block_matrix(sizes: &[usize], eps: f64) -> SymMatrix {
    let n: usize = sizes.iter().sum();
    let block: Vec<usize> = sizes.iter().enumerate().flat_map(|(b, &s)| vec![b; s]).collect();
    let s = SymMatrix::from_fn(n, |i, j| {
        if block[i] == block[j] {
            (1.0 - eps) / sizes[block[i]] as f64
        } else {
            eps / n as f64
        }
    })
    .unwrap();
    sca_core::balance::balance_matrix(&s, 1e-14, 100_000).unwrap().p
}
